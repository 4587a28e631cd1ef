#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjd/errors.hpp"
#include "mjd/linalg.hpp"
#include "mjd/rng.hpp"

namespace mjd {

// Jump-size law for the compound Poisson factor: either a finite list of
// jump vectors with probabilities, or a seedable sampler. Sampler laws are
// declared by the user to have finite second moments; the engine cannot
// check that.
struct JumpLaw {
    enum class Kind { discrete, uniform_sampler };

    Kind kind = Kind::discrete;

    // discrete support: values[j] is the jump vector of outcome j
    std::vector<std::vector<double>> values;
    std::vector<double> probs;

    // componentwise-uniform sampler: draws land in the open box (lo, hi)
    std::vector<double> lo;
    std::vector<double> hi;

    bool operator==(const JumpLaw&) const = default;

    int dim() const {
        if (kind == Kind::discrete) return values.empty() ? 0 : static_cast<int>(values[0].size());
        return static_cast<int>(lo.size());
    }

    // one jump vector; draw order is fixed so streams replay exactly
    void sample(CounterRng& rng, std::span<double> out) const {
        if (kind == Kind::discrete) {
            const double u = rng.uniform01();
            double cdf = 0.0;
            std::size_t pick = values.size() - 1;
            for (std::size_t j = 0; j < probs.size(); ++j) {
                cdf += probs[j];
                if (u <= cdf) {
                    pick = j;
                    break;
                }
            }
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[pick][i];
        } else {
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform01();
        }
    }

    std::vector<double> exact_mean() const {
        const int d = dim();
        std::vector<double> m(static_cast<std::size_t>(d), 0.0);
        for (std::size_t j = 0; j < values.size(); ++j)
            for (int i = 0; i < d; ++i) m[static_cast<std::size_t>(i)] += probs[j] * values[j][static_cast<std::size_t>(i)];
        return m;
    }
};

// Continuous Merton market. The drift is never user input: validation
// derives mu_i = -lambda E[U_i] so that the measure is a martingale measure.
struct MertonModel {
    int d = 0;                            // asset count
    std::vector<double> spot;             // S_i(0), all > 0
    double rate = 0.0;                    // r, continuously compounded per year
    double horizon = 0.0;                 // T in years
    std::vector<std::vector<double>> vol; // d x d, nonsingular
    double intensity = 0.0;               // lambda, jumps per year
    std::optional<JumpLaw> jumps;         // required when intensity > 0

    // derived by validate_model
    std::vector<double> drift;            // mu_i
    std::uint64_t drift_sample_count = 0; // 0 means exact (discrete law or lambda = 0)
    std::uint64_t drift_seed = 0;

    bool operator==(const MertonModel&) const = default;
};

namespace detail {
constexpr std::uint64_t kDriftSeed = 0x6a09e667f3bcc908ull;
constexpr std::uint64_t kDriftDraws = 100000;
} // namespace detail

inline void validate_jump_law(const JumpLaw& law, int d) {
    if (law.kind == JumpLaw::Kind::discrete) {
        if (law.values.empty()) fail("BadProbabilities", "discrete jump law has no outcomes");
        if (law.probs.size() != law.values.size())
            fail("BadProbabilities", "probs/values size mismatch");
        for (const auto& v : law.values) {
            if (static_cast<int>(v.size()) != d)
                fail("BadParameter", "jump vector dimension != asset count");
            for (double x : v)
                if (!(x > -1.0)) fail("JumpBelowMinusOne", "jump component " + std::to_string(x) + " not > -1");
        }
        for (double p : law.probs)
            if (!(p >= 0.0)) fail("BadProbabilities", "negative jump probability");
    } else {
        if (static_cast<int>(law.lo.size()) != d || static_cast<int>(law.hi.size()) != d)
            fail("BadParameter", "sampler bounds dimension != asset count");
        for (int i = 0; i < d; ++i) {
            if (!(law.lo[static_cast<std::size_t>(i)] >= -1.0))
                fail("JumpBelowMinusOne", "sampler lower bound below -1");
            if (!(law.lo[static_cast<std::size_t>(i)] < law.hi[static_cast<std::size_t>(i)]))
                fail("BadParameter", "sampler bounds not increasing");
        }
    }
}

// Validates all invariants and fills the drift. Idempotent: running it on
// an already-validated model reproduces the same bits.
inline MertonModel validate_model(MertonModel m) {
    m.d = static_cast<int>(m.spot.size());
    if (m.d < 1) fail("BadParameter", "model.spot must have at least one entry");
    for (double s : m.spot)
        if (!(s > 0.0)) fail("NonPositiveSpot", "spot " + std::to_string(s) + " not > 0");
    if (!(m.horizon > 0.0)) fail("BadParameter", "horizon must be > 0");
    if (!(m.rate >= 0.0)) fail("BadParameter", "rate must be >= 0");
    if (!(m.intensity >= 0.0)) fail("BadParameter", "intensity must be >= 0");
    if (static_cast<int>(m.vol.size()) != m.d)
        fail("BadParameter", "vol must be d x d");
    for (const auto& row : m.vol)
        if (static_cast<int>(row.size()) != m.d) fail("BadParameter", "vol must be d x d");
    if (scaled_abs_det(m.vol) <= 1e-12) fail("SingularVol", "row-scaled |det(vol)| <= 1e-12");

    if (m.intensity > 0.0) {
        if (!m.jumps) fail("BadParameter", "intensity > 0 requires a jump law");
        validate_jump_law(*m.jumps, m.d);
        if (m.jumps->kind == JumpLaw::Kind::discrete) {
            double sum = 0.0;
            for (double p : m.jumps->probs) sum += p;
            if (std::abs(sum - 1.0) > 1e-9) fail("BadProbabilities", "jump probabilities sum to " + std::to_string(sum));
            // renormalize decimal round-off; leave already-clean vectors
            // untouched so validation is bit-idempotent
            if (std::abs(sum - 1.0) > 1e-13)
                for (double& p : m.jumps->probs) p /= sum;
        }
    }

    m.drift.assign(static_cast<std::size_t>(m.d), 0.0);
    m.drift_sample_count = 0;
    m.drift_seed = 0;
    if (m.intensity > 0.0) {
        if (m.jumps->kind == JumpLaw::Kind::discrete) {
            const std::vector<double> mean = m.jumps->exact_mean();
            for (int i = 0; i < m.d; ++i) m.drift[static_cast<std::size_t>(i)] = -m.intensity * mean[static_cast<std::size_t>(i)];
        } else {
            CounterRng rng(detail::kDriftSeed, substream(Stream::drift, 0));
            std::vector<NeumaierSum> acc(static_cast<std::size_t>(m.d));
            std::vector<double> u(static_cast<std::size_t>(m.d));
            for (std::uint64_t k = 0; k < detail::kDriftDraws; ++k) {
                m.jumps->sample(rng, u);
                for (int i = 0; i < m.d; ++i) acc[static_cast<std::size_t>(i)].add(u[static_cast<std::size_t>(i)]);
            }
            for (int i = 0; i < m.d; ++i)
                m.drift[static_cast<std::size_t>(i)] =
                    -m.intensity * (acc[static_cast<std::size_t>(i)].value() / static_cast<double>(detail::kDriftDraws));
            m.drift_sample_count = detail::kDriftDraws;
            m.drift_seed = detail::kDriftSeed;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// payoffs

enum class PayoffFamily { basket_put, basket_call, max_call, min_put, constant };

// Closed parametric payoff set; each family's Lipschitz constant is known
// analytically, which is what makes the rate bound applicable.
struct Payoff {
    PayoffFamily family = PayoffFamily::basket_put;
    double strike = 0.0;
    std::vector<double> weights; // basket families only
    double lipschitz = 1.0;      // declared L >= 1

    bool operator==(const Payoff&) const = default;
};

inline Payoff make_payoff(PayoffFamily family, double strike, std::vector<double> weights = {}) {
    if (!(strike >= 0.0)) fail("BadParameter", "strike must be >= 0");
    const bool basket = family == PayoffFamily::basket_put || family == PayoffFamily::basket_call;
    if (basket && weights.empty()) fail("BadParameter", "basket payoff requires weights");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) fail("BadParameter", "weights must be >= 0");
        wsum += w;
    }
    Payoff p;
    p.family = family;
    p.strike = strike;
    p.weights = std::move(weights);
    p.lipschitz = std::max(1.0, wsum);
    return p;
}

inline double payoff_eval(const Payoff& p, std::span<const double> s, double /*t*/ = 0.0) {
    switch (p.family) {
        case PayoffFamily::basket_put: {
            double acc = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) acc += p.weights[i] * s[i];
            return std::max(p.strike - acc, 0.0);
        }
        case PayoffFamily::basket_call: {
            double acc = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) acc += p.weights[i] * s[i];
            return std::max(acc - p.strike, 0.0);
        }
        case PayoffFamily::max_call: {
            double m = s[0];
            for (double x : s) m = std::max(m, x);
            return std::max(m - p.strike, 0.0);
        }
        case PayoffFamily::min_put: {
            double m = s[0];
            for (double x : s) m = std::min(m, x);
            return std::max(p.strike - m, 0.0);
        }
        case PayoffFamily::constant:
            return p.strike;
    }
    return 0.0;
}

// Empirical Lipschitz ratio over random pairs on a bounded box: the worst of
//   |F(s,t) - F(s~,t~)| / (sum |s_i - s~_i| + |t - t~| (1 + sum s_i))
// with the pair oriented so t >= t~. Deterministic given the seed.
inline double lipschitz_probe(const Payoff& p, int dim, std::uint64_t pairs, std::uint64_t seed) {
    CounterRng rng(seed, substream(Stream::probe, 0));
    const double box = 2.0 * (p.strike + 1.0);
    std::vector<double> s(static_cast<std::size_t>(dim)), s2(static_cast<std::size_t>(dim));
    double worst = 0.0;
    for (std::uint64_t k = 0; k < pairs; ++k) {
        for (auto& x : s) x = box * rng.uniform01();
        for (auto& x : s2) x = box * rng.uniform01();
        double t = rng.uniform01();
        double t2 = rng.uniform01();
        if (t < t2) std::swap(t, t2);
        double dist = 0.0, smag = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            dist += std::abs(s[i] - s2[i]);
            smag += std::abs(s[i]);
        }
        const double denom = dist + (t - t2) * (1.0 + smag);
        if (denom < 1e-12) continue;
        const double num = std::abs(payoff_eval(p, s, t) - payoff_eval(p, s2, t2));
        worst = std::max(worst, num / denom);
    }
    return worst;
}

} // namespace mjd
