#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace mjd {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Splits [0, count) into contiguous chunks, one per worker. Callers must
// write disjoint slots and fix any per-slot reduction order so the result
// does not depend on the split.
template <class F>
inline void parallel_for(std::uint64_t count, int threads, F&& body) {
    const int nt = resolve_threads(threads);
    if (nt <= 1 || count < 2048) {
        body(static_cast<std::uint64_t>(0), count);
        return;
    }
    const std::uint64_t workers = std::min<std::uint64_t>(static_cast<std::uint64_t>(nt), count);
    const std::uint64_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint64_t w = 0; w < workers; ++w) {
        const std::uint64_t b = w * chunk;
        const std::uint64_t e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace mjd
