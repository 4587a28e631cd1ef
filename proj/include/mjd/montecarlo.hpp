#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjd/compositions.hpp"
#include "mjd/errors.hpp"
#include "mjd/linalg.hpp"
#include "mjd/model.hpp"
#include "mjd/parallel.hpp"
#include "mjd/rng.hpp"

namespace mjd {

struct MCConfig {
    std::uint64_t paths = 100000; // >= 100
    int steps = 50;               // exercise grid size for the American estimator
    std::uint64_t seed = 1;
    int basis_degree = 2; // regression basis: all monomials up to this total degree
    int threads = 0;
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t paths = 0;
    std::uint64_t seed = 0;
    double ci99_half = 0.0; // 2.576 * std_error
};

inline void validate_mc(const MCConfig& cfg) {
    if (cfg.paths < 100) fail("BadParameter", "mc.paths must be >= 100");
    if (cfg.steps < 1) fail("BadParameter", "mc.steps must be >= 1");
    if (cfg.basis_degree < 0) fail("BadParameter", "mc.basis_degree must be >= 0");
}

namespace detail {

// mean and standard error with a fixed reduction order (two Neumaier passes)
inline MCEstimate summarize(std::span<const double> x, std::uint64_t seed) {
    NeumaierSum s;
    for (double v : x) s.add(v);
    const double mean = s.value() / static_cast<double>(x.size());
    NeumaierSum ss;
    for (double v : x) ss.add((v - mean) * (v - mean));
    const double n = static_cast<double>(x.size());
    MCEstimate e;
    e.mean = mean;
    e.std_error = x.size() > 1 ? std::sqrt(ss.value() / (n * (n - 1.0))) : 0.0;
    e.paths = x.size();
    e.seed = seed;
    e.ci99_half = 2.576 * e.std_error;
    return e;
}

struct ModelDrifts {
    std::vector<double> log_drift; // (r + mu_i - sum_j sigma_ij^2 / 2) per year
};

inline ModelDrifts log_drifts(const MertonModel& m) {
    ModelDrifts out;
    out.log_drift.resize(static_cast<std::size_t>(m.d));
    for (int i = 0; i < m.d; ++i) {
        double s2 = 0.0;
        for (int j = 0; j < m.d; ++j) {
            const double v = m.vol[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            s2 += v * v;
        }
        out.log_drift[static_cast<std::size_t>(i)] =
            m.rate + m.drift[static_cast<std::size_t>(i)] - 0.5 * s2;
    }
    return out;
}

// advances one path over one interval of length dt, in place
inline void step_path(const MertonModel& m, const ModelDrifts& dr, double dt, CounterRng& rng,
                      std::span<double> s, std::span<double> z, std::span<double> u) {
    for (int j = 0; j < m.d; ++j) z[static_cast<std::size_t>(j)] = rng.normal();
    const double sdt = std::sqrt(dt);
    for (int i = 0; i < m.d; ++i) {
        double diff = 0.0;
        for (int j = 0; j < m.d; ++j)
            diff += m.vol[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                    z[static_cast<std::size_t>(j)];
        s[static_cast<std::size_t>(i)] *=
            std::exp(dr.log_drift[static_cast<std::size_t>(i)] * dt + sdt * diff);
    }
    if (m.intensity > 0.0) {
        const int jumps = rng.poisson(m.intensity * dt);
        for (int k = 0; k < jumps; ++k) {
            m.jumps->sample(rng, u);
            for (int i = 0; i < m.d; ++i)
                s[static_cast<std::size_t>(i)] *= 1.0 + u[static_cast<std::size_t>(i)];
        }
    }
}

} // namespace detail

// S(T) for `count` independent paths (row-major count x d). Each path owns
// substream (seed, path index), so the matrix is identical for any thread
// count and any later consumer of the same seed.
inline std::vector<double> simulate_terminal(const MertonModel& model, std::uint64_t seed,
                                             std::uint64_t count, int threads = 0) {
    const auto dr = detail::log_drifts(model);
    std::vector<double> out(count * static_cast<std::size_t>(model.d));
    parallel_for(count, threads, [&](std::uint64_t b, std::uint64_t e) {
        std::vector<double> z(static_cast<std::size_t>(model.d)), u(static_cast<std::size_t>(model.d));
        for (std::uint64_t p = b; p < e; ++p) {
            CounterRng rng(seed, substream(Stream::terminal_paths, p));
            std::span<double> s(&out[p * static_cast<std::size_t>(model.d)],
                                static_cast<std::size_t>(model.d));
            for (int i = 0; i < model.d; ++i) s[static_cast<std::size_t>(i)] = model.spot[static_cast<std::size_t>(i)];
            detail::step_path(model, dr, model.horizon, rng, s, z, u);
        }
    });
    return out;
}

// full paths on the grid {0, T/steps, ..., T}; layout count x (steps+1) x d
inline std::vector<double> simulate_grid_paths(const MertonModel& model, int steps,
                                               std::uint64_t seed, std::uint64_t count,
                                               Stream stream_tag = Stream::grid_paths,
                                               int threads = 0) {
    const auto dr = detail::log_drifts(model);
    const double dt = model.horizon / steps;
    const std::size_t stride = static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(model.d);
    std::vector<double> out(count * stride);
    parallel_for(count, threads, [&](std::uint64_t b, std::uint64_t e) {
        std::vector<double> z(static_cast<std::size_t>(model.d)), u(static_cast<std::size_t>(model.d));
        for (std::uint64_t p = b; p < e; ++p) {
            CounterRng rng(seed, substream(stream_tag, p));
            double* path = &out[p * stride];
            for (int i = 0; i < model.d; ++i) path[i] = model.spot[static_cast<std::size_t>(i)];
            for (int k = 1; k <= steps; ++k) {
                double* row = path + static_cast<std::size_t>(k) * model.d;
                const double* prev = path + static_cast<std::size_t>(k - 1) * model.d;
                for (int i = 0; i < model.d; ++i) row[i] = prev[i];
                detail::step_path(model, dr, dt, rng,
                                  std::span<double>(row, static_cast<std::size_t>(model.d)), z, u);
            }
        }
    });
    return out;
}

inline MCEstimate mc_european(const MertonModel& model, const Payoff& payoff, const MCConfig& cfg) {
    validate_mc(cfg);
    const std::vector<double> st = simulate_terminal(model, cfg.seed, cfg.paths, cfg.threads);
    const double discount = std::exp(-model.rate * model.horizon);
    std::vector<double> x(cfg.paths);
    parallel_for(cfg.paths, cfg.threads, [&](std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t p = b; p < e; ++p) {
            std::span<const double> s(&st[p * static_cast<std::size_t>(model.d)],
                                      static_cast<std::size_t>(model.d));
            x[p] = discount * payoff_eval(payoff, s, model.horizon);
        }
    });
    return detail::summarize(x, cfg.seed);
}

// ---------------------------------------------------------------------------
// closed-form references

inline double black_scholes(bool is_call, double s0, double strike, double sigma, double rate,
                            double horizon) {
    if (strike <= 0.0) return is_call ? s0 - strike * std::exp(-rate * horizon) : 0.0;
    const double sq = sigma * std::sqrt(horizon);
    const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * horizon) / sq;
    const double d2 = d1 - sq;
    const double df = std::exp(-rate * horizon);
    if (is_call) return s0 * normal_cdf(d1) - strike * df * normal_cdf(d2);
    return strike * df * normal_cdf(-d2) - s0 * normal_cdf(-d1);
}

// European price under a single deterministic jump size u: conditioning on
// the Poisson count k leaves a lognormal with spot S0 (1+u)^k exp(-lambda u T),
// so the price is a Poisson mixture of Black-Scholes values.
inline double poisson_mixture_european(bool is_call, double s0, double strike, double sigma,
                                       double rate, double horizon, double lambda, double u) {
    if (!(u > -1.0)) fail("BadParameter", "jump size must be > -1");
    if (!(lambda >= 0.0)) fail("BadParameter", "lambda must be >= 0");
    if (lambda == 0.0 || u == 0.0) return black_scholes(is_call, s0, strike, sigma, rate, horizon);
    const double lt = lambda * horizon;
    const double shift = std::exp(-lambda * u * horizon);
    double weight = std::exp(-lt);
    double cdf = weight;
    NeumaierSum acc;
    acc.add(weight * black_scholes(is_call, s0 * shift, strike, sigma, rate, horizon));
    int k = 0;
    while (1.0 - cdf >= 1e-12 || k < lt) {
        ++k;
        weight *= lt / k;
        cdf += weight;
        acc.add(weight *
                black_scholes(is_call, s0 * ipow(1.0 + u, k) * shift, strike, sigma, rate, horizon));
        if (k > 100000) break;
    }
    return acc.value();
}

// ---------------------------------------------------------------------------
// regression-based American lower bound

struct LsmcDiagnostics {
    bool ridge_used = false;           // normal equations needed the 1e-8 ridge
    bool exercised_at_root = false;    // intrinsic at t=0 beat the simulated rule
};

namespace detail {

// exponent vectors of all monomials in d variables with total degree <= deg
inline std::vector<std::vector<int>> monomial_exponents(int d, int deg) {
    std::vector<std::vector<int>> out;
    for (int t = 0; t <= deg; ++t)
        for_each_composition(t, d, [&](const std::vector<int>& c) { out.push_back(c); });
    return out;
}

inline void eval_basis(const std::vector<std::vector<int>>& expo, std::span<const double> x,
                       std::span<double> phi) {
    for (std::size_t b = 0; b < expo.size(); ++b) {
        double v = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int k = 0; k < expo[b][i]; ++k) v *= x[i];
        phi[b] = v;
    }
}

} // namespace detail

// Longstaff-Schwartz with out-of-sample evaluation: regress continuation
// values on in-the-money paths, then re-simulate fresh paths and price the
// resulting stopping rule. The returned mean is a low-biased estimate of the
// American value.
inline MCEstimate lsmc_american(const MertonModel& model, const Payoff& payoff, const MCConfig& cfg,
                                LsmcDiagnostics* diag = nullptr) {
    validate_mc(cfg);
    if (cfg.steps < 2) fail("BadParameter", "lsmc needs mc.steps >= 2");
    LsmcDiagnostics local;
    LsmcDiagnostics& dg = diag ? *diag : local;
    dg = {};

    const int d = model.d;
    const int steps = cfg.steps;
    const double dt = model.horizon / steps;
    const auto expo = detail::monomial_exponents(d, cfg.basis_degree);
    const std::size_t nb = expo.size();
    const std::size_t stride = static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(d);

    const std::vector<double> fit =
        simulate_grid_paths(model, steps, cfg.seed, cfg.paths, Stream::grid_paths, cfg.threads);

    // cashflow of the current rule per path, valued at its exercise step
    std::vector<double> cf(cfg.paths);
    std::vector<int> ex(cfg.paths, steps);
    for (std::uint64_t p = 0; p < cfg.paths; ++p) {
        std::span<const double> s(&fit[p * stride + static_cast<std::size_t>(steps) * d],
                                  static_cast<std::size_t>(d));
        cf[p] = payoff_eval(payoff, s, model.horizon);
    }

    std::vector<std::optional<std::vector<double>>> beta(static_cast<std::size_t>(steps));
    std::vector<double> x(static_cast<std::size_t>(d)), phi(nb);
    for (int t = steps - 1; t >= 1; --t) {
        std::vector<std::uint64_t> itm;
        for (std::uint64_t p = 0; p < cfg.paths; ++p) {
            std::span<const double> s(&fit[p * stride + static_cast<std::size_t>(t) * d],
                                      static_cast<std::size_t>(d));
            if (payoff_eval(payoff, s, t * dt) > 0.0) itm.push_back(p);
        }
        if (itm.size() < std::max<std::size_t>(nb, 10)) continue;

        std::vector<double> a(nb * nb, 0.0), rhs(nb, 0.0);
        for (std::uint64_t p : itm) {
            const double* s = &fit[p * stride + static_cast<std::size_t>(t) * d];
            for (int i = 0; i < d; ++i)
                x[static_cast<std::size_t>(i)] = s[i] / model.spot[static_cast<std::size_t>(i)];
            detail::eval_basis(expo, x, phi);
            const double y = cf[p] * std::exp(-model.rate * (ex[p] - t) * dt);
            for (std::size_t i = 0; i < nb; ++i) {
                rhs[i] += phi[i] * y;
                for (std::size_t j = 0; j <= i; ++j) a[i * nb + j] += phi[i] * phi[j];
            }
        }
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = i + 1; j < nb; ++j) a[i * nb + j] = a[j * nb + i];

        std::vector<double> coef;
        if (!cholesky_solve(a, rhs, nb, coef)) {
            for (std::size_t i = 0; i < nb; ++i) a[i * nb + i] += 1e-8;
            if (!cholesky_solve(a, rhs, nb, coef))
                fail("RegressionSingular", "normal equations singular even with ridge");
            dg.ridge_used = true;
        }
        beta[static_cast<std::size_t>(t)] = coef;

        for (std::uint64_t p : itm) {
            const double* s = &fit[p * stride + static_cast<std::size_t>(t) * d];
            for (int i = 0; i < d; ++i)
                x[static_cast<std::size_t>(i)] = s[i] / model.spot[static_cast<std::size_t>(i)];
            detail::eval_basis(expo, x, phi);
            double cont = 0.0;
            for (std::size_t i = 0; i < nb; ++i) cont += coef[i] * phi[i];
            const double imm =
                payoff_eval(payoff, std::span<const double>(s, static_cast<std::size_t>(d)), t * dt);
            if (imm >= cont) {
                cf[p] = imm;
                ex[p] = t;
            }
        }
    }

    // out-of-sample pricing of the regressed rule on fresh paths
    const std::vector<double> eval =
        simulate_grid_paths(model, steps, cfg.seed, cfg.paths, Stream::lsmc_eval, cfg.threads);
    std::vector<double> payout(cfg.paths);
    parallel_for(cfg.paths, cfg.threads, [&](std::uint64_t b, std::uint64_t e) {
        std::vector<double> xx(static_cast<std::size_t>(d)), ph(nb);
        for (std::uint64_t p = b; p < e; ++p) {
            double v = 0.0;
            bool stopped = false;
            for (int t = 1; t < steps && !stopped; ++t) {
                if (!beta[static_cast<std::size_t>(t)]) continue;
                const double* s = &eval[p * stride + static_cast<std::size_t>(t) * d];
                const double imm =
                    payoff_eval(payoff, std::span<const double>(s, static_cast<std::size_t>(d)), t * dt);
                if (imm <= 0.0) continue;
                for (int i = 0; i < d; ++i)
                    xx[static_cast<std::size_t>(i)] = s[i] / model.spot[static_cast<std::size_t>(i)];
                detail::eval_basis(expo, xx, ph);
                double cont = 0.0;
                for (std::size_t i = 0; i < nb; ++i) cont += (*beta[static_cast<std::size_t>(t)])[i] * ph[i];
                if (imm >= cont) {
                    v = std::exp(-model.rate * t * dt) * imm;
                    stopped = true;
                }
            }
            if (!stopped) {
                const double* s = &eval[p * stride + static_cast<std::size_t>(steps) * d];
                v = std::exp(-model.rate * model.horizon) *
                    payoff_eval(payoff, std::span<const double>(s, static_cast<std::size_t>(d)),
                                model.horizon);
            }
            payout[p] = v;
        }
    });

    MCEstimate est = detail::summarize(payout, cfg.seed);
    const double intrinsic = payoff_eval(payoff, model.spot, 0.0);
    if (intrinsic >= est.mean) {
        // exercising immediately beats the simulated rule; deterministic value
        est.mean = intrinsic;
        est.std_error = 0.0;
        est.ci99_half = 0.0;
        dg.exercised_at_root = true;
    }
    return est;
}

} // namespace mjd
