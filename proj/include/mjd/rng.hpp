#pragma once

#include <cmath>
#include <cstdint>

namespace mjd {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Fixed stream tags so every consumer of randomness gets its own substream
// family and reruns are reproducible no matter what else ran before.
enum class Stream : std::uint64_t {
    terminal_paths = 1,
    grid_paths = 2,
    lsmc_eval = 3,
    jump_tail = 4,
    probe = 5,
    drift = 6,
    table_draws = 7,
};

constexpr std::uint64_t substream(Stream s, std::uint64_t index) noexcept {
    return (static_cast<std::uint64_t>(s) << 40) | index;
}

inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Acklam's rational approximation for the inverse normal CDF, polished with
// one Halley step against erfc. Good to ~1e-15 over (0,1).
inline double inverse_normal_cdf(double p) noexcept {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double dd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                     2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    // Halley refinement
    const double e = normal_cdf(x) - p;
    const double u = e * 2.50662827463100050242 * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// Counter-based generator: the k-th output is a pure function of
// (seed, stream, k). Substreams are cheap, draws replay identically under
// any parallel schedule, and copies fork the counter state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(seed ^ 0x8f462907c3fd4a6cull) ^ mix64(mix64(stream) + 0x1d8e4e27c47d124full)) {}

    std::uint64_t next_u64() noexcept {
        return mix64(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
    }

    // open interval (0,1): safe to feed straight into inverse CDFs
    double uniform01() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() noexcept { return inverse_normal_cdf(uniform01()); }

    // Poisson by CDF inversion; exact for the small means used here
    int poisson(double mean) noexcept {
        if (mean <= 0.0) return 0;
        const double u = uniform01();
        double pmf = std::exp(-mean);
        double cdf = pmf;
        int k = 0;
        const int cap = static_cast<int>(mean + 40.0 * std::sqrt(mean) + 50.0);
        while (u > cdf && k < cap) {
            ++k;
            pmf *= mean / k;
            cdf += pmf;
        }
        return k;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// Neumaier compensated accumulator; summation order is part of the
// determinism contract so every reduction site fixes its own order.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) noexcept {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    double value() const noexcept { return sum + comp; }
};

} // namespace mjd
