#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mjd/convergence.hpp"
#include "mjd/lattice.hpp"
#include "mjd/model.hpp"
#include "mjd/montecarlo.hpp"
#include "mjd/pricer.hpp"

namespace mjd {

struct SelftestOptions {
    bool corrupt_xi = false; // test hook: perturbs the xi table before the moment checks
};

struct SelftestCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace selftest_detail {

inline double xi_moment_error(const XiTable& t) {
    const int q = t.d + 1;
    double worst = 0.0;
    for (int j = 0; j < t.d; ++j) {
        double mean = 0.0;
        for (int w = 0; w < q; ++w) mean += t.rows[static_cast<std::size_t>(w)][static_cast<std::size_t>(j)];
        worst = std::max(worst, std::abs(mean / q));
    }
    for (int i = 0; i < t.d; ++i)
        for (int j = 0; j < t.d; ++j) {
            double cov = 0.0;
            for (int w = 0; w < q; ++w)
                cov += t.rows[static_cast<std::size_t>(w)][static_cast<std::size_t>(i)] *
                       t.rows[static_cast<std::size_t>(w)][static_cast<std::size_t>(j)];
            cov /= q;
            worst = std::max(worst, std::abs(cov - (i == j ? 1.0 : 0.0)));
        }
    for (int w = 0; w < q; ++w) {
        double norm2 = 0.0;
        for (double x : t.rows[static_cast<std::size_t>(w)]) norm2 += x * x;
        worst = std::max(worst, std::abs(norm2 - t.d));
    }
    return worst;
}

inline double martingale_error(const LatticeSpec& spec) {
    const double target = std::exp(spec.rate * spec.dt);
    double worst = 0.0;
    for (int i = 0; i < spec.d; ++i) {
        NeumaierSum s;
        for (int b = 0; b < spec.branch_count(); ++b)
            s.add(spec.branch_prob[static_cast<std::size_t>(b)] *
                  spec.branch_factor[static_cast<std::size_t>(b) * spec.d + static_cast<std::size_t>(i)]);
        worst = std::max(worst, std::abs(s.value() / target - 1.0));
    }
    return worst;
}

inline MertonModel small_model(int d, double lambda, const JumpLaw* law) {
    MertonModel m;
    m.spot.assign(static_cast<std::size_t>(d), 1.0);
    m.rate = 0.04;
    m.horizon = 0.5;
    m.vol.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) {
        m.vol[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.25;
        if (i > 0) m.vol[static_cast<std::size_t>(i)][0] = 0.05;
    }
    m.intensity = lambda;
    if (law) m.jumps = *law;
    return validate_model(std::move(m));
}

} // namespace selftest_detail

// The embedded invariant suite behind `mjd selftest`: one named check per
// line, exit nonzero if any fails.
inline std::vector<SelftestCheck> run_selftest(const SelftestOptions& opts = {}) {
    using namespace selftest_detail;
    std::vector<SelftestCheck> out;
    auto push = [&](const std::string& name, bool pass, const std::string& detail) {
        out.push_back({name, pass, detail});
    };

    for (int d = 1; d <= 6; ++d) {
        XiTable t = build_xi(d);
        if (opts.corrupt_xi) t.rows[0][0] += 1e-6;
        const double err = xi_moment_error(t);
        push("xi_moments_d" + std::to_string(d), err <= 1e-12, "max deviation " + std::to_string(err));
    }
    {
        XiTable t = build_xi(1);
        if (opts.corrupt_xi) t.rows[0][0] += 1e-6;
        double lo = t.rows[0][0], hi = t.rows[1][0];
        if (lo > hi) std::swap(lo, hi);
        push("xi_d1_reduces_to_pm1", std::abs(lo + 1.0) <= 1e-12 && std::abs(hi - 1.0) <= 1e-12,
             "outcomes " + std::to_string(lo) + ", " + std::to_string(hi));
    }

    {
        const MertonModel m = small_model(1, 0.0, nullptr);
        const double err = martingale_error(build_lattice(m, {}, 16));
        push("martingale_identity_diffusion_1d", err <= 1e-12, "relative error " + std::to_string(err));
    }
    {
        JumpLaw law;
        law.values = {{-0.25}};
        law.probs = {1.0};
        const MertonModel m = small_model(1, 0.5, &law);
        const DiscreteJumpLaw dj = discretize_jumps(*m.jumps, 16, JumpMode::native);
        const double err = martingale_error(build_lattice(m, dj, 16));
        push("martingale_identity_jump_1d", err <= 1e-12, "relative error " + std::to_string(err));
    }
    {
        JumpLaw law;
        law.values = {{-0.2, -0.1}, {0.15, 0.25}};
        law.probs = {0.4, 0.6};
        const MertonModel m = small_model(2, 1.0, &law);
        const DiscreteJumpLaw dj = discretize_jumps(*m.jumps, 8, JumpMode::native);
        const double err = martingale_error(build_lattice(m, dj, 8));
        push("martingale_identity_jump_2d", err <= 1e-12, "relative error " + std::to_string(err));
    }

    {
        JumpLaw law;
        law.values = {{-0.3}, {0.4}};
        law.probs = {0.5, 0.5};
        const MertonModel m = small_model(1, 1.2, &law);
        const Payoff p = make_payoff(PayoffFamily::basket_put, 1.05, {1.0});
        const DiscreteJumpLaw dj = discretize_jumps(*m.jumps, 3, JumpMode::native);
        const double dp = price_american(m, p, 3, dj).value;
        const double oracle = enumerate_stopping_oracle(m, p, 3, dj);
        push("bruteforce_equality_n3", std::abs(dp - oracle) <= 1e-12,
             "dp " + std::to_string(dp) + " oracle " + std::to_string(oracle));
    }

    {
        const double call = black_scholes(true, 1.0, 1.0, 0.2, 0.05, 1.0);
        const double put = black_scholes(false, 1.0, 1.0, 0.2, 0.05, 1.0);
        const double gap = std::abs(call - put - (1.0 - std::exp(-0.05)));
        push("oracle_put_call_parity", gap <= 1e-12, "parity gap " + std::to_string(gap));
    }
    {
        const double a = poisson_mixture_european(true, 1.0, 1.1, 0.2, 0.05, 1.0, 0.0, -0.25);
        const double b = black_scholes(true, 1.0, 1.1, 0.2, 0.05, 1.0);
        push("oracle_poisson_mixture_lambda0", std::abs(a - b) <= 1e-12,
             "difference " + std::to_string(std::abs(a - b)));
    }

    {
        JumpLaw law;
        law.kind = JumpLaw::Kind::uniform_sampler;
        law.lo = {-0.5};
        law.hi = {0.5};
        const int n = 256;
        const DiscreteJumpLaw dj = discretize_jumps(law, n, JumpMode::discretized);
        CounterRng rng(0xd1c3, substream(Stream::table_draws, 0));
        const double h = jump_cell_width(n);
        NeumaierSum acc;
        const int draws = 100000;
        std::vector<double> u(1);
        for (int k = 0; k < draws; ++k) {
            law.sample(rng, u);
            acc.add(std::abs(u[0] - snap_to_jump_grid(u[0], h, dj.truncation)));
        }
        const double err = acc.value() / draws;
        const double bound = std::pow(256.0, -0.125);
        push("jump_discretization_bound_n256", err < bound,
             "E|U-U^n| " + std::to_string(err) + " vs " + std::to_string(bound));
    }

    {
        MertonModel m;
        m.spot = {1.0};
        m.rate = 0.0;
        m.horizon = 1.0;
        m.vol = {{1.0}};
        m.intensity = 0.0;
        m = validate_model(std::move(m));
        const Payoff p = make_payoff(PayoffFamily::basket_put, 1.0, {1.0});
        const double v = price_american(m, p, 1, {}).value;
        push("pricer_two_branch_example", std::abs(v - 0.5) <= 1e-15, "value " + std::to_string(v));
    }

    return out;
}

} // namespace mjd
