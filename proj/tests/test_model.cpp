#include <doctest.h>

#include <cmath>
#include <vector>

#include "mjd/model.hpp"

using namespace mjd;

namespace {

MertonModel base_1d() {
    MertonModel m;
    m.spot = {1.0};
    m.rate = 0.05;
    m.horizon = 1.0;
    m.vol = {{0.2}};
    m.intensity = 0.0;
    return m;
}

} // namespace

TEST_CASE("drift is zero without jumps") {
    const MertonModel m = validate_model(base_1d());
    CHECK(m.drift == std::vector<double>{0.0});
    CHECK(m.drift_sample_count == 0);
}

TEST_CASE("drift offsets the expected jump exactly") {
    MertonModel m = base_1d();
    m.intensity = 1.0;
    JumpLaw law;
    law.values = {{-0.5}};
    law.probs = {1.0};
    m.jumps = law;
    const MertonModel v = validate_model(m);
    CHECK(v.drift[0] == 0.5);
    // lambda E[U] + mu is identically zero, not just small
    CHECK(v.intensity * v.jumps->exact_mean()[0] + v.drift[0] == 0.0);
}

TEST_CASE("two-asset drift from a hand-computed sum") {
    MertonModel m;
    m.spot = {1.0, 2.0};
    m.rate = 0.03;
    m.horizon = 2.0;
    m.vol = {{0.2, 0.0}, {0.05, 0.3}};
    m.intensity = 2.0;
    JumpLaw law;
    law.values = {{0.1, -0.2}, {-0.1, 0.4}};
    law.probs = {0.5, 0.5};
    m.jumps = law;
    const MertonModel v = validate_model(m);
    CHECK(std::abs(v.drift[0] - 0.0) <= 1e-15);
    CHECK(std::abs(v.drift[1] - (-0.2)) <= 1e-15);
    for (int i = 0; i < 2; ++i)
        CHECK(v.intensity * v.jumps->exact_mean()[static_cast<std::size_t>(i)] +
                  v.drift[static_cast<std::size_t>(i)] ==
              0.0);
}

TEST_CASE("sampler drift uses the recorded fixed-seed estimate") {
    MertonModel m = base_1d();
    m.intensity = 0.8;
    JumpLaw law;
    law.kind = JumpLaw::Kind::uniform_sampler;
    law.lo = {-0.4};
    law.hi = {0.2};
    m.jumps = law;
    const MertonModel v = validate_model(m);
    CHECK(v.drift_sample_count == 100000);
    // true mean is -0.1; the estimate sits within a few standard errors
    CHECK(std::abs(v.drift[0] - 0.08) < 0.8 * 5.0 * (0.6 / std::sqrt(12.0)) / std::sqrt(1e5));
    MertonModel again = base_1d();
    again.intensity = 0.8;
    again.jumps = law;
    const MertonModel v2 = validate_model(again);
    CHECK(v2.drift[0] == v.drift[0]);
}

TEST_CASE("validation rejects the documented bad inputs") {
    {
        MertonModel m = base_1d();
        m.spot = {0.0};
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("NonPositiveSpot"), Error);
    }
    {
        MertonModel m = base_1d();
        m.spot = {1.0, 1.0};
        m.vol = {{0.3, 0.3}, {0.3, 0.3}};
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("SingularVol"), Error);
    }
    {
        MertonModel m = base_1d();
        m.intensity = 1.0;
        JumpLaw law;
        law.values = {{-1.0}};
        law.probs = {1.0};
        m.jumps = law;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("JumpBelowMinusOne"), Error);
    }
    {
        MertonModel m = base_1d();
        m.intensity = 1.0;
        JumpLaw law;
        law.values = {{0.1}, {0.2}};
        law.probs = {0.5, 0.4};
        m.jumps = law;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("BadProbabilities"), Error);
    }
    {
        MertonModel m = base_1d();
        m.rate = -0.01;
        CHECK_THROWS_AS(validate_model(m), Error);
    }
}

TEST_CASE("probabilities within 1e-9 of one are renormalized") {
    MertonModel m = base_1d();
    m.intensity = 1.0;
    JumpLaw law;
    law.values = {{0.1}, {0.2}};
    law.probs = {0.5, 0.5 + 4e-10};
    m.jumps = law;
    const MertonModel v = validate_model(m);
    double sum = 0.0;
    for (double p : v.jumps->probs) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-13);
}

TEST_CASE("validation is idempotent") {
    MertonModel m = base_1d();
    m.intensity = 1.3;
    JumpLaw law;
    law.values = {{-0.3}, {0.4}};
    law.probs = {0.25, 0.75 + 3e-10};
    m.jumps = law;
    const MertonModel once = validate_model(m);
    const MertonModel twice = validate_model(once);
    CHECK(once == twice);
}

TEST_CASE("payoff families evaluate per their definitions") {
    const std::vector<double> s1{1.0};
    CHECK(payoff_eval(make_payoff(PayoffFamily::basket_put, 1.0, {1.0}), s1, 0.0) == 0.0);
    const std::vector<double> s2{0.5, 0.5};
    CHECK(payoff_eval(make_payoff(PayoffFamily::basket_put, 2.0, {1.0, 1.0}), s2, 0.3) == 1.0);
    const std::vector<double> s3{0.8, 1.3};
    CHECK(payoff_eval(make_payoff(PayoffFamily::max_call, 1.0), s3, 0.0) ==
          doctest::Approx(0.3).epsilon(1e-14));
    CHECK(payoff_eval(make_payoff(PayoffFamily::min_put, 1.0), s3, 0.0) ==
          doctest::Approx(0.2).epsilon(1e-14));
    CHECK(payoff_eval(make_payoff(PayoffFamily::constant, 2.5), s3, 0.7) == 2.5);
    CHECK(payoff_eval(make_payoff(PayoffFamily::basket_call, 1.0, {1.0, 1.0}), s2, 0.0) == 0.0);
}

TEST_CASE("payoffs are nonnegative on random inputs") {
    CounterRng rng(3, 0);
    const auto payoffs = {make_payoff(PayoffFamily::basket_put, 1.2, {0.5, 0.7}),
                          make_payoff(PayoffFamily::basket_call, 0.9, {1.0, 2.0}),
                          make_payoff(PayoffFamily::max_call, 1.0),
                          make_payoff(PayoffFamily::min_put, 1.0),
                          make_payoff(PayoffFamily::constant, 0.3)};
    std::vector<double> s(2);
    for (const Payoff& p : payoffs)
        for (int k = 0; k < 2000; ++k) {
            for (double& x : s) x = 4.0 * rng.uniform01();
            CHECK(payoff_eval(p, s, rng.uniform01()) >= 0.0);
        }
}

TEST_CASE("lipschitz probe stays under the declared constant") {
    CHECK(lipschitz_probe(make_payoff(PayoffFamily::constant, 2.0), 2, 2000, 5) == 0.0);

    const Payoff put = make_payoff(PayoffFamily::basket_put, 1.0, {1.0});
    CHECK(lipschitz_probe(put, 1, 10000, 5) <= 1.0 + 1e-12);

    const Payoff call23 = make_payoff(PayoffFamily::basket_call, 1.0, {2.0, 3.0});
    const double r = lipschitz_probe(call23, 2, 10000, 5);
    CHECK(r <= 3.0 + 1e-12); // per-coordinate gradient bound
    CHECK(r <= call23.lipschitz + 1e-9);
    CHECK(call23.lipschitz == 5.0);

    for (const Payoff& p : {make_payoff(PayoffFamily::max_call, 1.0),
                            make_payoff(PayoffFamily::min_put, 1.5)})
        CHECK(lipschitz_probe(p, 3, 5000, 9) <= p.lipschitz + 1e-9);
}
