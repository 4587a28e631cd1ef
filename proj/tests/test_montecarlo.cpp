#include <doctest.h>

#include <cmath>
#include <vector>

#include "mjd/montecarlo.hpp"
#include "mjd/pricer.hpp"

using namespace mjd;

namespace {

MertonModel bs_model(double sigma = 0.2, double rate = 0.05, double horizon = 1.0) {
    MertonModel m;
    m.spot = {1.0};
    m.rate = rate;
    m.horizon = horizon;
    m.vol = {{sigma}};
    m.intensity = 0.0;
    return validate_model(m);
}

MertonModel det_jump_model(double lambda, double u) {
    MertonModel m;
    m.spot = {1.0};
    m.rate = 0.05;
    m.horizon = 1.0;
    m.vol = {{0.2}};
    m.intensity = lambda;
    JumpLaw law;
    law.values = {{u}};
    law.probs = {1.0};
    m.jumps = law;
    return validate_model(m);
}

// Simpson quadrature of the discounted lognormal payoff; independent of the
// closed form it checks
double bs_quadrature(bool is_call, double s0, double k, double sigma, double r, double t) {
    const double mu = (r - 0.5 * sigma * sigma) * t;
    const double sd = sigma * std::sqrt(t);
    const double lo = -12.0, hi = 12.0;
    const int steps = 48000; // even
    const double h = (hi - lo) / steps;
    auto f = [&](double z) {
        const double s = s0 * std::exp(mu + sd * z);
        const double pay = is_call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
        return pay * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < steps; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return std::exp(-r * t) * acc * h / 3.0;
}

} // namespace

TEST_CASE("terminal lognormal moments match within five standard errors") {
    const MertonModel m = bs_model(0.2, 0.05, 1.0);
    const std::uint64_t n = 1000000;
    const std::vector<double> st = simulate_terminal(m, 311, n);
    double s = 0.0, s2 = 0.0;
    for (double x : st) {
        const double l = std::log(x);
        s += l;
        s2 += l * l;
    }
    const double mean = s / static_cast<double>(n);
    const double var = s2 / static_cast<double>(n) - mean * mean;
    const double want_mean = 0.05 - 0.02; // log S0 + (r - sigma^2/2) T
    const double want_var = 0.04;
    const double se_mean = std::sqrt(var / static_cast<double>(n));
    CHECK(std::abs(mean - want_mean) <= 5.0 * se_mean);
    CHECK(std::abs(var - want_var) <= 5.0 * want_var * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("discounted assets are martingales even with heavy jumps") {
    const MertonModel m = det_jump_model(1.0, -0.5);
    const std::uint64_t n = 1000000;
    const std::vector<double> st = simulate_terminal(m, 712, n);
    const double df = std::exp(-m.rate * m.horizon);
    double s = 0.0, s2 = 0.0;
    for (double x : st) {
        const double y = df * x;
        s += y;
        s2 += y * y;
    }
    const double mean = s / static_cast<double>(n);
    const double se = std::sqrt((s2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
    CHECK(std::abs(mean - 1.0) <= 5.0 * se);
}

TEST_CASE("grid paths end at the same law as the one-shot terminal draw") {
    const MertonModel m = det_jump_model(0.6, -0.25);
    const std::uint64_t n = 200000;
    const std::vector<double> paths = simulate_grid_paths(m, 8, 99, n);
    const double df = std::exp(-m.rate * m.horizon);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t p = 0; p < n; ++p) {
        const double y = df * paths[p * 9 + 8];
        s += y;
        s2 += y * y;
    }
    const double mean = s / static_cast<double>(n);
    const double se = std::sqrt((s2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
    CHECK(std::abs(mean - 1.0) <= 5.0 * se); // martingale property on the grid
}

TEST_CASE("simulation replays bit-identically per seed and thread count") {
    const MertonModel m = det_jump_model(0.9, -0.3);
    const std::vector<double> a = simulate_terminal(m, 5, 4096, 1);
    const std::vector<double> b = simulate_terminal(m, 5, 4096, 4);
    CHECK(a == b);
    const std::vector<double> c = simulate_grid_paths(m, 6, 5, 4096, Stream::grid_paths, 1);
    const std::vector<double> d = simulate_grid_paths(m, 6, 5, 4096, Stream::grid_paths, 4);
    CHECK(c == d);
    const std::vector<double> e = simulate_terminal(m, 6, 4096, 1);
    CHECK(a != e);
}

TEST_CASE("mc on a constant payoff is exact with zero spread") {
    const MertonModel m = bs_model();
    MCConfig cfg;
    cfg.paths = 5000;
    cfg.seed = 4;
    const MCEstimate est = mc_european(m, make_payoff(PayoffFamily::constant, 2.0), cfg);
    CHECK(est.mean == doctest::Approx(2.0 * std::exp(-0.05)).epsilon(1e-14));
    CHECK(est.std_error <= 1e-15);
    CHECK(est.ci99_half == 2.576 * est.std_error);
}

TEST_CASE("mc matches black-scholes within its own confidence band") {
    const MertonModel m = bs_model();
    MCConfig cfg;
    cfg.paths = 400000;
    cfg.seed = 20260808;
    const MCEstimate est = mc_european(m, make_payoff(PayoffFamily::basket_call, 1.0, {1.0}), cfg);
    const double bs = black_scholes(true, 1.0, 1.0, 0.2, 0.05, 1.0);
    CHECK(std::abs(est.mean - bs) <= est.ci99_half);
}

TEST_CASE("mc config guards") {
    MCConfig cfg;
    cfg.paths = 10;
    CHECK_THROWS_AS(validate_mc(cfg), Error);
    cfg.paths = 1000;
    cfg.steps = 0;
    CHECK_THROWS_AS(validate_mc(cfg), Error);
}

TEST_CASE("black-scholes edge cases and parity") {
    CHECK(black_scholes(true, 1.3, 0.0, 0.2, 0.05, 1.0) == doctest::Approx(1.3).epsilon(1e-14));
    const double call = black_scholes(true, 1.0, 1.0, 0.2, 0.05, 1.0);
    const double put = black_scholes(false, 1.0, 1.0, 0.2, 0.05, 1.0);
    CHECK(std::abs(call - put - (1.0 - std::exp(-0.05))) <= 1e-12);
}

TEST_CASE("black-scholes agrees with numerical quadrature") {
    const double bs = black_scholes(true, 1.0, 1.0, 0.2, 0.05, 1.0);
    CHECK(std::abs(bs - bs_quadrature(true, 1.0, 1.0, 0.2, 0.05, 1.0)) <= 1e-8);
    const double bp = black_scholes(false, 1.0, 1.1, 0.25, 0.03, 0.7);
    CHECK(std::abs(bp - bs_quadrature(false, 1.0, 1.1, 0.25, 0.03, 0.7)) <= 1e-8);
}

TEST_CASE("poisson mixture collapses to black-scholes when jumps vanish") {
    const double bs = black_scholes(true, 1.0, 1.05, 0.2, 0.05, 1.0);
    CHECK(std::abs(poisson_mixture_european(true, 1.0, 1.05, 0.2, 0.05, 1.0, 0.0, -0.25) - bs) <=
          1e-12);
    CHECK(std::abs(poisson_mixture_european(true, 1.0, 1.05, 0.2, 0.05, 1.0, 0.8, 0.0) - bs) <=
          1e-12);
}

TEST_CASE("poisson mixture matches monte carlo at a million paths") {
    const double lambda = 0.5;
    const double u = -0.25;
    const MertonModel m = det_jump_model(lambda, u);
    MCConfig cfg;
    cfg.paths = 1000000;
    cfg.seed = 20260808;
    const MCEstimate est = mc_european(m, make_payoff(PayoffFamily::basket_call, 1.0, {1.0}), cfg);
    const double mix = poisson_mixture_european(true, 1.0, 1.0, 0.2, 0.05, 1.0, lambda, u);
    CHECK(std::abs(est.mean - mix) <= est.ci99_half);
}

TEST_CASE("lsmc exercises a constant payoff immediately") {
    const MertonModel m = bs_model();
    MCConfig cfg;
    cfg.paths = 2000;
    cfg.steps = 8;
    cfg.seed = 17;
    LsmcDiagnostics diag;
    const MCEstimate est = lsmc_american(m, make_payoff(PayoffFamily::constant, 1.5), cfg, &diag);
    CHECK(est.mean == 1.5);
    CHECK(est.std_error == 0.0);
    CHECK(diag.exercised_at_root);
}

TEST_CASE("lsmc call without dividends prices like the european") {
    const MertonModel m = bs_model();
    MCConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 25;
    cfg.seed = 20260808;
    const MCEstimate est = lsmc_american(m, make_payoff(PayoffFamily::basket_call, 1.0, {1.0}), cfg);
    const double bs = black_scholes(true, 1.0, 1.0, 0.2, 0.05, 1.0);
    CHECK(std::abs(est.mean - bs) <= est.ci99_half + 1e-3);
}

TEST_CASE("lsmc is a lower bound for the converged lattice price") {
    const MertonModel m = bs_model();
    const Payoff put = make_payoff(PayoffFamily::basket_put, 1.0, {1.0});
    MCConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 50;
    cfg.seed = 20260808;
    const MCEstimate est = lsmc_american(m, put, cfg);
    const double lattice = price_american(m, put, 256, {}).value;
    CHECK(est.mean <= lattice + 3.0 * est.std_error);
    CHECK(est.mean >= lattice - 0.01); // and not absurdly loose either
}

TEST_CASE("lsmc lower bound holds on the two-asset basket") {
    MertonModel m;
    m.spot = {1.0, 1.0};
    m.rate = 0.05;
    m.horizon = 0.5;
    m.vol = {{0.3, 0.0}, {0.1, 0.2}};
    m.intensity = 1.0;
    JumpLaw law;
    law.values = {{-0.2, -0.1}, {0.15, 0.25}};
    law.probs = {0.4, 0.6};
    m.jumps = law;
    m = validate_model(m);
    const Payoff put = make_payoff(PayoffFamily::basket_put, 2.0, {1.0, 1.0});
    MCConfig cfg;
    cfg.paths = 50000;
    cfg.steps = 25;
    cfg.seed = 20260808;
    const MCEstimate est = lsmc_american(m, put, cfg);
    const DiscreteJumpLaw dj = discretize_jumps(*m.jumps, 64, JumpMode::native);
    const double lattice = price_american(m, put, 64, dj).value;
    CHECK(est.mean <= lattice + 3.0 * est.std_error);
    CHECK(est.mean >= lattice - 0.02);
}
