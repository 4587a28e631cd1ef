#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mjd/errors.hpp"
#include "mjd/model.hpp"
#include "mjd/rng.hpp"

namespace mjd {

// ---------------------------------------------------------------------------
// xi vectors: d+1 equiprobable diffusion increments with mean 0, unit
// covariance and |xi|^2 = d, read off the first d columns of an orthogonal
// (d+1)x(d+1) matrix whose last column is (1,...,1)/sqrt(d+1).

struct XiTable {
    int d = 0;
    std::vector<std::vector<double>> rows; // d+1 vectors of length d; each outcome has prob 1/(d+1)

    bool operator==(const XiTable&) const = default;
};

// A is the Householder reflection I - 2 v v^T / |v|^2 with
// v = e_{d+1} - (1,...,1)/sqrt(d+1): orthogonal, symmetric, exact last column.
inline XiTable build_xi(int d) {
    if (d < 1) fail("BadParameter", "dimension must be >= 1");
    const int q = d + 1;
    const double s = 1.0 / std::sqrt(static_cast<double>(q));
    std::vector<double> v(static_cast<std::size_t>(q), -s);
    v[static_cast<std::size_t>(q - 1)] = 1.0 - s;
    double vv = 0.0;
    for (double x : v) vv += x * x;
    const double scale = std::sqrt(static_cast<double>(q));

    XiTable t;
    t.d = d;
    t.rows.assign(static_cast<std::size_t>(q), std::vector<double>(static_cast<std::size_t>(d)));
    for (int w = 0; w < q; ++w)
        for (int j = 0; j < d; ++j) {
            const double a = (w == j ? 1.0 : 0.0) -
                             2.0 * v[static_cast<std::size_t>(w)] * v[static_cast<std::size_t>(j)] / vv;
            t.rows[static_cast<std::size_t>(w)][static_cast<std::size_t>(j)] = scale * a;
        }
    return t;
}

// ---------------------------------------------------------------------------
// jump-size discretization

// Finite jump law used by the lattice: either the native finite-support law
// or the grid-discretized version of an arbitrary law.
struct DiscreteJumpLaw {
    enum class Origin { native, discretized };

    std::vector<std::vector<double>> values; // J vectors in (-1, inf)^d
    std::vector<double> probs;
    Origin origin = Origin::native;
    int n = 0;          // discretization step count (discretized only)
    int truncation = 0; // M(n) (discretized only)

    bool operator==(const DiscreteJumpLaw&) const = default;

    int size() const { return static_cast<int>(values.size()); }
    int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }

    std::vector<double> mean() const {
        std::vector<double> m(static_cast<std::size_t>(dim()), 0.0);
        for (std::size_t j = 0; j < values.size(); ++j)
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += probs[j] * values[j][i];
        return m;
    }
};

enum class JumpMode { native, discretized };

struct DiscretizeOptions {
    std::uint64_t tail_samples = 100000;
    std::uint64_t seed = 0x243f6a8885a308d3ull;
};

// cell width of the jump grid g_k = k h - 1
inline double jump_cell_width(int n) { return 0.5 * std::pow(static_cast<double>(n), -0.125); }

// right-endpoint mapping: u in (g_{k-1}, g_k] -> g_k; u above g_M -> 0
inline double snap_to_jump_grid(double u, double h, int m_trunc) {
    const int k = static_cast<int>(std::ceil((u + 1.0) / h));
    if (k > m_trunc) return 0.0;
    return std::max(k, 1) * h - 1.0;
}

namespace detail {

struct TailStats {
    double signed_tail = 0.0; // sum_j E[U_j 1{U_j > g}]
    double abs_tail = 0.0;    // sum_j E[|U_j| 1{U_j > g}]
};

inline TailStats tails_above(const std::vector<std::vector<double>>& draws,
                             const std::vector<double>& weights, double g) {
    TailStats t;
    double wsum = 0.0;
    for (std::size_t k = 0; k < draws.size(); ++k) {
        wsum += weights[k];
        for (double x : draws[k])
            if (x > g) {
                t.signed_tail += weights[k] * x;
                t.abs_tail += weights[k] * std::abs(x);
            }
    }
    t.signed_tail /= wsum;
    t.abs_tail /= wsum;
    return t;
}

} // namespace detail

// Maps the jump law onto the grid g_k = (k/2) n^{-1/8} - 1, k = 1..M(n).
// M(n) is the smallest index whose grid covers the (for samplers: empirical)
// support, so the tail-mass condition holds with room to spare; when the
// O(n^{1/4}) scan cap cannot reach the support, the smallest index whose
// absolute tail mass is below n^{-1/8}/2 is used instead and everything
// above g_M maps to 0.
inline DiscreteJumpLaw discretize_jumps(const JumpLaw& law, int n, JumpMode mode,
                                        const DiscretizeOptions& opts = {}) {
    if (n < 1) fail("BadParameter", "n must be >= 1");
    if (mode == JumpMode::native) {
        if (law.kind != JumpLaw::Kind::discrete)
            fail("NativeSamplerUnsupported", "native jump mode requires a discrete law");
        DiscreteJumpLaw out;
        out.values = law.values;
        out.probs = law.probs;
        out.origin = DiscreteJumpLaw::Origin::native;
        return out;
    }

    const double h = jump_cell_width(n);
    const int cap = static_cast<int>(std::ceil(8.0 * std::pow(static_cast<double>(n), 0.25)));

    // realized support: exact atoms for discrete laws, a fixed-seed sample
    // for samplers
    std::vector<std::vector<double>> pts;
    std::vector<double> wts;
    if (law.kind == JumpLaw::Kind::discrete) {
        pts = law.values;
        wts = law.probs;
    } else {
        CounterRng rng(opts.seed, substream(Stream::jump_tail, 0));
        pts.assign(opts.tail_samples, std::vector<double>(static_cast<std::size_t>(law.dim())));
        wts.assign(opts.tail_samples, 1.0);
        for (auto& p : pts) law.sample(rng, p);
    }

    double umax = -1.0;
    for (const auto& p : pts)
        for (double x : p) umax = std::max(umax, x);

    int m_trunc = 0;
    const int k_cover = std::max(1, static_cast<int>(std::ceil((umax + 1.0) / h)));
    if (k_cover <= cap) {
        m_trunc = k_cover;
    } else {
        for (int k = 1; k <= cap; ++k) {
            const double g = k * h - 1.0;
            if (detail::tails_above(pts, wts, g).abs_tail < h) {
                m_trunc = k;
                break;
            }
        }
        if (m_trunc == 0)
            fail("TailNotResolvable",
                 "no truncation level <= " + std::to_string(cap) + " meets the tail bound; raise n");
    }

    {
        const double g = m_trunc * h - 1.0;
        const auto t = detail::tails_above(pts, wts, g);
        if (!(t.signed_tail < h))
            fail("TailNotResolvable", "tail condition not met at chosen truncation level");
        if (law.kind != JumpLaw::Kind::discrete) {
            // the estimate must hold on each half of the sample, otherwise the
            // budget was too small to trust
            const std::size_t half = pts.size() / 2;
            std::vector<std::vector<double>> lo(pts.begin(), pts.begin() + half);
            std::vector<std::vector<double>> hi(pts.begin() + half, pts.end());
            std::vector<double> wlo(wts.begin(), wts.begin() + half);
            std::vector<double> whi(wts.begin() + half, wts.end());
            if (!(detail::tails_above(lo, wlo, g).abs_tail < h) ||
                !(detail::tails_above(hi, whi, g).abs_tail < h))
                fail("TailNotResolvable", "tail estimate does not stabilize within the sample budget");
        }
    }

    // snap every point and merge identical vectors
    std::map<std::vector<double>, double> merged;
    double wsum = 0.0;
    for (double w : wts) wsum += w;
    std::vector<double> snapped(static_cast<std::size_t>(law.dim()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
        for (std::size_t i = 0; i < snapped.size(); ++i)
            snapped[i] = snap_to_jump_grid(pts[k][i], h, m_trunc);
        merged[snapped] += wts[k] / wsum;
    }

    DiscreteJumpLaw out;
    out.origin = DiscreteJumpLaw::Origin::discretized;
    out.n = n;
    out.truncation = m_trunc;
    out.values.reserve(merged.size());
    out.probs.reserve(merged.size());
    for (const auto& [v, p] : merged) {
        out.values.push_back(v);
        out.probs.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// the per-step branch structure of the n-step multinomial market

// One step multiplies each coordinate by
//   exp(r dt) (1 + sqrt(dt) (sigma xi^w)_i) (1 + u_i if a jump fires) / denom_i
// with denom_i = 1 + p E[u_i], which makes the discounted step a martingale
// by construction.
struct LatticeSpec {
    int d = 0;
    int n = 0;
    double dt = 0.0;
    double rate = 0.0;
    double jump_prob = 0.0; // p = 1 - exp(-lambda T / n); 0 when no jump leg
    int num_diffusion = 0;  // d+1
    int num_jump = 1;       // J+1, or 1 when lambda = 0

    std::vector<double> denom;            // d
    std::vector<double> diffusion_factor; // num_diffusion x d, includes exp(r dt)/denom
    std::vector<double> jump_factor;      // num_jump x d; row 0 is all ones
    std::vector<double> branch_prob;      // num_diffusion * num_jump
    std::vector<double> branch_factor;    // (num_diffusion * num_jump) x d

    XiTable xi;
    DiscreteJumpLaw jumps;

    int branch_count() const { return num_diffusion * num_jump; }
};

inline LatticeSpec build_lattice(const MertonModel& model, const DiscreteJumpLaw& jumps, int n) {
    if (n < 1) fail("BadParameter", "n must be >= 1");
    const int d = model.d;
    LatticeSpec spec;
    spec.d = d;
    spec.n = n;
    spec.dt = model.horizon / n;
    spec.rate = model.rate;
    spec.xi = build_xi(d);
    spec.num_diffusion = d + 1;

    const bool with_jumps = model.intensity > 0.0;
    if (with_jumps) {
        if (jumps.size() == 0) fail("BadParameter", "intensity > 0 requires a nonempty jump law");
        if (jumps.dim() != d) fail("BadParameter", "jump law dimension != asset count");
        spec.jumps = jumps;
        spec.jump_prob = 1.0 - std::exp(-model.intensity * spec.dt);
        spec.num_jump = jumps.size() + 1;
    }

    spec.denom.assign(static_cast<std::size_t>(d), 1.0);
    if (with_jumps) {
        const std::vector<double> mean = spec.jumps.mean();
        for (int i = 0; i < d; ++i)
            spec.denom[static_cast<std::size_t>(i)] = 1.0 + spec.jump_prob * mean[static_cast<std::size_t>(i)];
    }

    const double growth = std::exp(model.rate * spec.dt);
    const double sdt = std::sqrt(spec.dt);
    spec.diffusion_factor.assign(static_cast<std::size_t>(spec.num_diffusion) * d, 0.0);
    for (int w = 0; w < spec.num_diffusion; ++w)
        for (int i = 0; i < d; ++i) {
            double sx = 0.0;
            for (int j = 0; j < d; ++j)
                sx += model.vol[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                      spec.xi.rows[static_cast<std::size_t>(w)][static_cast<std::size_t>(j)];
            const double raw = 1.0 + sdt * sx;
            if (raw < 0.0)
                fail("NegativeDiffusionFactor",
                     "1 + sqrt(T/n) (sigma xi)_" + std::to_string(i) + " = " + std::to_string(raw) +
                         " at n = " + std::to_string(n) + "; raise n");
            spec.diffusion_factor[static_cast<std::size_t>(w) * d + static_cast<std::size_t>(i)] =
                growth * raw / spec.denom[static_cast<std::size_t>(i)];
        }

    spec.jump_factor.assign(static_cast<std::size_t>(spec.num_jump) * d, 1.0);
    for (int m = 1; m < spec.num_jump; ++m)
        for (int i = 0; i < d; ++i)
            spec.jump_factor[static_cast<std::size_t>(m) * d + static_cast<std::size_t>(i)] =
                1.0 + spec.jumps.values[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)];

    const double pdiff = 1.0 / spec.num_diffusion;
    spec.branch_prob.assign(static_cast<std::size_t>(spec.branch_count()), 0.0);
    spec.branch_factor.assign(static_cast<std::size_t>(spec.branch_count()) * d, 0.0);
    for (int w = 0; w < spec.num_diffusion; ++w)
        for (int m = 0; m < spec.num_jump; ++m) {
            const std::size_t b = static_cast<std::size_t>(w) * spec.num_jump + static_cast<std::size_t>(m);
            double pj = 1.0;
            if (with_jumps)
                pj = (m == 0) ? 1.0 - spec.jump_prob
                              : spec.jump_prob * spec.jumps.probs[static_cast<std::size_t>(m - 1)];
            spec.branch_prob[b] = pdiff * pj;
            for (int i = 0; i < d; ++i)
                spec.branch_factor[b * d + static_cast<std::size_t>(i)] =
                    spec.diffusion_factor[static_cast<std::size_t>(w) * d + static_cast<std::size_t>(i)] *
                    spec.jump_factor[static_cast<std::size_t>(m) * d + static_cast<std::size_t>(i)];
        }
    return spec;
}

// ---------------------------------------------------------------------------
// recombining state identity

// A node is identified by how many times each branch type has fired, not by
// the order; step factors commute so the price is order-free.
struct StateKey {
    int step = 0;
    std::vector<int> diffusion_counts; // size d+1, sums to step
    std::vector<int> jump_counts;      // size J+1, sums to step; empty when no jump leg
};

inline std::vector<double> state_price(std::span<const double> spot, const StateKey& key,
                                       const LatticeSpec& spec) {
    auto check = [&](const std::vector<int>& counts, int want_size) {
        if (static_cast<int>(counts.size()) != want_size)
            fail("InconsistentCounts", "count vector has wrong arity");
        long long total = 0;
        for (int c : counts) {
            if (c < 0) fail("InconsistentCounts", "negative count");
            total += c;
        }
        if (total != key.step) fail("InconsistentCounts", "counts do not sum to the step index");
    };
    check(key.diffusion_counts, spec.num_diffusion);
    if (spec.num_jump > 1 || !key.jump_counts.empty()) check(key.jump_counts, spec.num_jump);

    std::vector<double> price(spot.begin(), spot.end());
    for (int i = 0; i < spec.d; ++i) {
        double f = 1.0;
        for (int w = 0; w < spec.num_diffusion; ++w)
            f *= ipow(spec.diffusion_factor[static_cast<std::size_t>(w) * spec.d + static_cast<std::size_t>(i)],
                      key.diffusion_counts[static_cast<std::size_t>(w)]);
        for (std::size_t m = 0; m < key.jump_counts.size(); ++m)
            f *= ipow(spec.jump_factor[m * static_cast<std::size_t>(spec.d) + static_cast<std::size_t>(i)],
                      key.jump_counts[m]);
        price[static_cast<std::size_t>(i)] *= f;
    }
    return price;
}

} // namespace mjd
