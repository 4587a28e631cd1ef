#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mjd {

// Typed engine error. `kind` is a stable identifier (SingularVol,
// NegativeDiffusionFactor, ...) that the CLI prints and tests match on;
// what() carries the full message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
    throw Error(std::move(kind), message);
}

} // namespace mjd
