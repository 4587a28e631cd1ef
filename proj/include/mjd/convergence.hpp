#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mjd/errors.hpp"
#include "mjd/lattice.hpp"
#include "mjd/model.hpp"
#include "mjd/montecarlo.hpp"
#include "mjd/pricer.hpp"

namespace mjd {

enum class ReferenceMode { closed_form, mc, richardson };
enum class ReferenceKind { black_scholes, poisson_mixture, discounted_constant, mc_ci, richardson };

inline const char* to_string(ReferenceKind k) {
    switch (k) {
        case ReferenceKind::black_scholes: return "black_scholes";
        case ReferenceKind::poisson_mixture: return "poisson_mixture";
        case ReferenceKind::discounted_constant: return "discounted_constant";
        case ReferenceKind::mc_ci: return "mc_ci";
        case ReferenceKind::richardson: return "richardson";
    }
    return "?";
}

struct RateFit {
    double c = 0.0;
    double beta = 0.0;
    double residual = 0.0; // residual standard error of the log-log fit
};

// least squares of log e against log n; beta = -slope, c = exp(intercept)
inline RateFit fit_rate(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) fail("DegenerateFit", "need at least two positive-error points");
    for (const auto& [n, e] : points)
        if (!(e > 0.0) || !(n > 0.0)) fail("DegenerateFit", "errors must be positive");
    const double m = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [n, e] : points) {
        const double x = std::log(n);
        const double y = std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-14) fail("DegenerateFit", "ladder has no spread in n");
    const double slope = (m * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / m;
    double ssr = 0.0;
    for (const auto& [n, e] : points) {
        const double r = std::log(e) - (intercept + slope * std::log(n));
        ssr += r * r;
    }
    RateFit f;
    f.beta = -slope;
    f.c = std::exp(intercept);
    f.residual = points.size() > 2 ? std::sqrt(ssr / (m - 2.0)) : 0.0;
    return f;
}

// assumed-order-p extrapolation from values at n and 2n
inline double richardson(double value_at_n, double value_at_2n, double order) {
    const double w = std::pow(2.0, order);
    return (w * value_at_2n - value_at_n) / (w - 1.0);
}

struct StudyPoint {
    int n = 0;
    double value = 0.0;
    double seconds = 0.0;
};

struct ConvergenceReport {
    std::vector<StudyPoint> points;
    double reference = 0.0;
    ReferenceKind ref_kind = ReferenceKind::richardson;
    double ref_ci_half = 0.0; // mc_ci references only
    std::vector<double> errors;
    bool exact_agreement = false; // every error below 1e-14; no rate to fit
    bool has_fit = false;
    RateFit fit;
    double shape_sup = 0.0;       // max_n e_n n^{1/8}
    bool shape_consistent = true; // errors admit a finite envelope C n^{-1/8}
    int inversions = 0;           // count of e_{k+1} > e_k
    bool has_lsmc = false;  // American studies carry an LSMC sanity band
    MCEstimate lsmc;
    std::uint64_t seed = 0;
};

namespace detail {

// closed forms exist for d = 1 vanilla-equivalent payoffs only
struct Vanilla {
    bool ok = false;
    bool is_call = false;
};

inline Vanilla as_vanilla(const Payoff& p, int d) {
    Vanilla v;
    if (d != 1) return v;
    switch (p.family) {
        case PayoffFamily::basket_call:
        case PayoffFamily::basket_put:
            if (p.weights.size() != 1 || p.weights[0] != 1.0) return v;
            v.ok = true;
            v.is_call = p.family == PayoffFamily::basket_call;
            return v;
        case PayoffFamily::max_call:
            v.ok = true;
            v.is_call = true;
            return v;
        case PayoffFamily::min_put:
            v.ok = true;
            v.is_call = false;
            return v;
        case PayoffFamily::constant:
            return v;
    }
    return v;
}

} // namespace detail

// Prices the ladder and compares against the reference the mode selects:
// closed_form / mc price the European contract against its oracle,
// richardson prices the American contract against the extrapolated limit of
// the two largest rungs (order 1), with an LSMC band recorded alongside.
inline ConvergenceReport run_study(const MertonModel& model, const Payoff& payoff, JumpMode jump_mode,
                                   std::span<const int> n_list, ReferenceMode mode,
                                   const MCConfig& mc_cfg, const PricerOptions& opts = {}) {
    if (n_list.size() < 3) fail("InsufficientLadder", "need at least three n values");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) fail("InsufficientLadder", "n values must be strictly increasing");

    ConvergenceReport rep;
    rep.seed = mc_cfg.seed;
    const bool american = mode == ReferenceMode::richardson;

    for (int n : n_list) {
        DiscreteJumpLaw law;
        if (model.intensity > 0.0) {
            DiscretizeOptions dopt;
            dopt.tail_samples = mc_cfg.paths;
            dopt.seed = mc_cfg.seed;
            law = discretize_jumps(*model.jumps, n, jump_mode, dopt);
        }
        const PricingResult r = american ? price_american(model, payoff, n, law, opts)
                                         : price_european(model, payoff, n, law, opts);
        rep.points.push_back({n, r.value, r.seconds});
    }

    switch (mode) {
        case ReferenceMode::closed_form: {
            if (payoff.family == PayoffFamily::constant) {
                rep.reference = std::exp(-model.rate * model.horizon) * payoff.strike;
                rep.ref_kind = ReferenceKind::discounted_constant;
                break;
            }
            const auto v = detail::as_vanilla(payoff, model.d);
            if (!v.ok)
                fail("NoClosedForm", "closed-form reference needs a d=1 vanilla-equivalent payoff");
            const double sigma = std::abs(model.vol[0][0]);
            if (model.intensity == 0.0) {
                rep.reference = black_scholes(v.is_call, model.spot[0], payoff.strike, sigma,
                                              model.rate, model.horizon);
                rep.ref_kind = ReferenceKind::black_scholes;
            } else {
                if (!model.jumps || model.jumps->kind != JumpLaw::Kind::discrete ||
                    model.jumps->values.size() != 1)
                    fail("NoClosedForm", "jump closed form needs a single deterministic jump size");
                rep.reference =
                    poisson_mixture_european(v.is_call, model.spot[0], payoff.strike, sigma,
                                             model.rate, model.horizon, model.intensity,
                                             model.jumps->values[0][0]);
                rep.ref_kind = ReferenceKind::poisson_mixture;
            }
            break;
        }
        case ReferenceMode::mc: {
            const MCEstimate est = mc_european(model, payoff, mc_cfg);
            rep.reference = est.mean;
            rep.ref_ci_half = est.ci99_half;
            rep.ref_kind = ReferenceKind::mc_ci;
            break;
        }
        case ReferenceMode::richardson: {
            const std::size_t m = rep.points.size();
            if (rep.points[m - 1].n != 2 * rep.points[m - 2].n)
                fail("InsufficientLadder", "richardson reference needs the two largest n in ratio 2");
            rep.reference = richardson(rep.points[m - 2].value, rep.points[m - 1].value, 1.0);
            rep.ref_kind = ReferenceKind::richardson;
            rep.lsmc = lsmc_american(model, payoff, mc_cfg);
            rep.has_lsmc = true;
            break;
        }
    }

    rep.errors.resize(rep.points.size());
    for (std::size_t i = 0; i < rep.points.size(); ++i)
        rep.errors[i] = std::abs(rep.points[i].value - rep.reference);

    rep.exact_agreement = true;
    for (double e : rep.errors)
        if (e >= 1e-14) rep.exact_agreement = false;

    for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
        if (rep.errors[i + 1] > rep.errors[i]) ++rep.inversions;

    rep.shape_sup = 0.0;
    for (std::size_t i = 0; i < rep.errors.size(); ++i)
        rep.shape_sup = std::max(
            rep.shape_sup, rep.errors[i] * std::pow(static_cast<double>(rep.points[i].n), 0.125));
    rep.shape_consistent = std::isfinite(rep.shape_sup);

    if (!rep.exact_agreement) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < rep.errors.size(); ++i)
            if (rep.errors[i] > 0.0)
                pts.emplace_back(static_cast<double>(rep.points[i].n), rep.errors[i]);
        if (pts.size() >= 2) {
            rep.fit = fit_rate(pts);
            rep.has_fit = true;
        }
    }
    return rep;
}

} // namespace mjd
