#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace mjd {

// Pascal-triangle table of C(m, j), saturating at uint64 max. Budget checks
// run in double arithmetic before any table this large gets used.
struct BinomTable {
    int max_m = 0;
    int max_j = 0;
    std::vector<std::uint64_t> v; // (max_m+1) x (max_j+1)

    std::uint64_t operator()(int m, int j) const {
        if (j < 0 || j > m) return 0;
        if (j > max_j) return 0;
        return v[static_cast<std::size_t>(m) * (max_j + 1) + j];
    }

    static BinomTable build(int max_m, int max_j) {
        BinomTable t;
        t.max_m = max_m;
        t.max_j = max_j;
        t.v.assign(static_cast<std::size_t>(max_m + 1) * (max_j + 1), 0);
        for (int m = 0; m <= max_m; ++m) {
            t.v[static_cast<std::size_t>(m) * (max_j + 1)] = 1;
            for (int j = 1; j <= max_j && j <= m; ++j) {
                const std::uint64_t a = t(m - 1, j - 1);
                const std::uint64_t b = t(m - 1, j);
                const std::uint64_t s = a + b;
                t.v[static_cast<std::size_t>(m) * (max_j + 1) + j] =
                    (s < a) ? std::numeric_limits<std::uint64_t>::max() : s;
            }
        }
        return t;
    }
};

// Compositions: count vectors with `parts` nonnegative entries summing to
// `total`, enumerated lexicographically ascending (first entry slowest).
// There are C(total+parts-1, parts-1) of them.

inline double composition_count_approx(int total, int parts) {
    double r = 1.0;
    for (int i = 1; i < parts; ++i) r *= static_cast<double>(total + i) / i;
    return r;
}

inline std::uint64_t composition_count(int total, int parts, const BinomTable& binom) {
    return binom(total + parts - 1, parts - 1);
}

inline std::uint64_t composition_rank(std::span<const int> counts, const BinomTable& binom) {
    const int q = static_cast<int>(counts.size());
    int rem = 0;
    for (int x : counts) rem += x;
    std::uint64_t r = 0;
    for (int i = 0; i + 1 < q; ++i) {
        const int p_rest = q - 1 - i;
        // compositions sharing the prefix but with a smaller entry here
        r += binom(rem + p_rest, p_rest) - binom(rem - counts[i] + p_rest, p_rest);
        rem -= counts[i];
    }
    return r;
}

template <class F>
inline void for_each_composition(int total, int parts, F&& f) {
    std::vector<int> c(static_cast<std::size_t>(parts), 0);
    auto rec = [&](auto&& self, int i, int rem) -> void {
        if (i == parts - 1) {
            c[static_cast<std::size_t>(i)] = rem;
            f(static_cast<const std::vector<int>&>(c));
            return;
        }
        for (int x = 0; x <= rem; ++x) {
            c[static_cast<std::size_t>(i)] = x;
            self(self, i + 1, rem - x);
        }
    };
    rec(rec, 0, total);
}

} // namespace mjd
