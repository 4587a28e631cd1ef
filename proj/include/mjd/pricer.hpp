#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mjd/compositions.hpp"
#include "mjd/errors.hpp"
#include "mjd/lattice.hpp"
#include "mjd/model.hpp"
#include "mjd/parallel.hpp"

namespace mjd {

struct PricerOptions {
    std::uint64_t state_budget = 50'000'000; // cap on live states (two adjacent layers)
    int threads = 0;                         // 0 = all cores
    bool exercise_stats = false;
};

struct PricingResult {
    double value = 0.0;
    int n = 0;
    std::vector<std::uint64_t> states_per_step; // size n+1
    bool exercise_at_root = false;
    std::vector<double> exercise_fraction; // per step when requested, else empty
    double seconds = 0.0;
};

namespace detail {

// Lookup tables for one composition space at one time step: the enumerated
// count vectors, each state's successor rank per branch type, and the
// per-coordinate product of factors^counts.
struct SpaceLevel {
    int parts = 0;
    int total = 0;
    std::uint64_t count = 0;
    std::vector<std::uint64_t> next; // count x parts
    std::vector<double> price;       // count x d
};

inline SpaceLevel build_space_level(int total, int parts, int d, const double* type_factor,
                                    const BinomTable& binom, bool with_price, bool with_next) {
    SpaceLevel lv;
    lv.parts = parts;
    lv.total = total;
    lv.count = composition_count(total, parts, binom);
    if (with_next) lv.next.resize(lv.count * static_cast<std::size_t>(parts));
    if (with_price) lv.price.resize(lv.count * static_cast<std::size_t>(d));
    std::uint64_t r = 0;
    std::vector<int> nb(static_cast<std::size_t>(parts));
    for_each_composition(total, parts, [&](const std::vector<int>& c) {
        if (with_next) {
            nb = c;
            for (int w = 0; w < parts; ++w) {
                nb[static_cast<std::size_t>(w)] += 1;
                lv.next[r * static_cast<std::size_t>(parts) + static_cast<std::size_t>(w)] =
                    composition_rank(nb, binom);
                nb[static_cast<std::size_t>(w)] -= 1;
            }
        }
        if (with_price) {
            for (int i = 0; i < d; ++i) {
                double f = 1.0;
                for (int w = 0; w < parts; ++w)
                    f *= ipow(type_factor[static_cast<std::size_t>(w) * d + static_cast<std::size_t>(i)],
                              c[static_cast<std::size_t>(w)]);
                lv.price[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = f;
            }
        }
        ++r;
    });
    return lv;
}

// Backward induction over the product of the two composition spaces.
// Node(k, s, immediate, continuation, exercised&) -> layer value; states of a
// layer are independent and each node's branch sum runs in a fixed order, so
// results are bit-identical for any thread count.
template <class Node>
inline PricingResult backward_sweep(const MertonModel& model, const Payoff& payoff,
                                    const LatticeSpec& spec, const PricerOptions& opts,
                                    bool needs_immediate, Node&& node) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = spec.n;
    const int d = spec.d;
    const int qd = spec.num_diffusion;
    const int qj = spec.num_jump;

    // budget check in double arithmetic before any table is materialized
    std::vector<double> approx(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        approx[static_cast<std::size_t>(k)] =
            composition_count_approx(k, qd) * composition_count_approx(k, qj);
    double live = approx[static_cast<std::size_t>(n)];
    for (int k = 0; k < n; ++k)
        live = std::max(live, approx[static_cast<std::size_t>(k)] + approx[static_cast<std::size_t>(k) + 1]);
    if (!(live <= static_cast<double>(opts.state_budget)))
        fail("StateBudgetExceeded", "peak live states " + std::to_string(live) + " exceed budget " +
                                        std::to_string(opts.state_budget));

    const BinomTable bd = BinomTable::build(n + qd, qd - 1);
    const BinomTable bj = BinomTable::build(n + qj, qj - 1);

    PricingResult res;
    res.n = n;
    res.states_per_step.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        res.states_per_step[static_cast<std::size_t>(k)] =
            composition_count(k, qd, bd) * composition_count(k, qj, bj);
    if (opts.exercise_stats) res.exercise_fraction.assign(static_cast<std::size_t>(n) + 1, 0.0);

    const std::span<const double> spot(model.spot);
    auto disc = [&](int k) { return std::exp(-spec.rate * k * spec.dt); };

    // terminal layer
    SpaceLevel dlv = build_space_level(n, qd, d, spec.diffusion_factor.data(), bd, true, false);
    SpaceLevel jlv = build_space_level(n, qj, d, spec.jump_factor.data(), bj, true, false);
    std::vector<double> next(dlv.count * jlv.count);
    {
        const double dn = disc(n);
        const double tn = model.horizon;
        parallel_for(dlv.count, opts.threads, [&](std::uint64_t b, std::uint64_t e) {
            std::vector<double> s(static_cast<std::size_t>(d));
            for (std::uint64_t dr = b; dr < e; ++dr)
                for (std::uint64_t jr = 0; jr < jlv.count; ++jr) {
                    for (int i = 0; i < d; ++i)
                        s[static_cast<std::size_t>(i)] =
                            spot[static_cast<std::size_t>(i)] *
                            dlv.price[dr * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] *
                            jlv.price[jr * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
                    next[dr * jlv.count + jr] = dn * payoff_eval(payoff, s, tn);
                }
        });
    }
    if (opts.exercise_stats) res.exercise_fraction[static_cast<std::size_t>(n)] = 1.0;

    bool root_exercised = false;
    std::vector<double> cur;
    for (int k = n - 1; k >= 0; --k) {
        const std::uint64_t jn_next = jlv.count;
        dlv = build_space_level(k, qd, d, spec.diffusion_factor.data(), bd, needs_immediate, true);
        jlv = build_space_level(k, qj, d, spec.jump_factor.data(), bj, needs_immediate, true);
        cur.assign(dlv.count * jlv.count, 0.0);
        const double dk = disc(k);
        const double tk = k * spec.dt;
        std::atomic<std::uint64_t> exercised_states{0};

        parallel_for(dlv.count, opts.threads, [&](std::uint64_t b, std::uint64_t e) {
            std::vector<double> s(static_cast<std::size_t>(d));
            std::uint64_t local_ex = 0;
            for (std::uint64_t dr = b; dr < e; ++dr) {
                const std::uint64_t* dnext = &dlv.next[dr * static_cast<std::size_t>(qd)];
                for (std::uint64_t jr = 0; jr < jlv.count; ++jr) {
                    const std::uint64_t* jnext = &jlv.next[jr * static_cast<std::size_t>(qj)];
                    NeumaierSum cs;
                    for (int w = 0; w < qd; ++w) {
                        const std::uint64_t base = dnext[w] * jn_next;
                        const double* probs = &spec.branch_prob[static_cast<std::size_t>(w) * qj];
                        for (int m = 0; m < qj; ++m) cs.add(probs[m] * next[base + jnext[m]]);
                    }
                    const double cont = cs.value();
                    double imm = 0.0;
                    if (needs_immediate) {
                        for (int i = 0; i < d; ++i)
                            s[static_cast<std::size_t>(i)] =
                                spot[static_cast<std::size_t>(i)] *
                                dlv.price[dr * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] *
                                jlv.price[jr * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
                        imm = dk * payoff_eval(payoff, s, tk);
                    }
                    bool ex = false;
                    cur[dr * jlv.count + jr] = node(k, std::span<const double>(s), imm, cont, ex);
                    if (ex) ++local_ex;
                    if (k == 0) root_exercised = ex;
                }
            }
            if (local_ex) exercised_states.fetch_add(local_ex, std::memory_order_relaxed);
        });

        if (opts.exercise_stats)
            res.exercise_fraction[static_cast<std::size_t>(k)] =
                static_cast<double>(exercised_states.load()) / static_cast<double>(cur.size());
        next.swap(cur);
    }

    res.value = next[0];
    res.exercise_at_root = root_exercised;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace detail

// Snell envelope on the recombining state space: layer n holds the
// discounted payoff, layer k the max of discounted immediate exercise and
// the branch-probability-weighted continuation. Exercise wins ties.
inline PricingResult price_american(const MertonModel& model, const Payoff& payoff, int n,
                                    const DiscreteJumpLaw& jumps, const PricerOptions& opts = {}) {
    const LatticeSpec spec = build_lattice(model, jumps, n);
    return detail::backward_sweep(model, payoff, spec, opts, true,
                                  [](int, std::span<const double>, double imm, double cont, bool& ex) {
                                      ex = imm >= cont;
                                      return imm >= cont ? imm : cont;
                                  });
}

// Same sweep without the max: discounted expectation of the terminal payoff.
inline PricingResult price_european(const MertonModel& model, const Payoff& payoff, int n,
                                    const DiscreteJumpLaw& jumps, const PricerOptions& opts = {}) {
    const LatticeSpec spec = build_lattice(model, jumps, n);
    return detail::backward_sweep(model, payoff, spec, opts, false,
                                  [](int, std::span<const double>, double, double cont, bool& ex) {
                                      ex = false;
                                      return cont;
                                  });
}

// Value of a fixed exercise rule on the lattice. Any admissible rule is
// dominated by the Snell envelope, which makes this a useful lower-bound
// probe for tests and experiments.
template <class Rule>
inline PricingResult stopping_rule_value(const MertonModel& model, const Payoff& payoff, int n,
                                         const DiscreteJumpLaw& jumps, Rule&& rule,
                                         const PricerOptions& opts = {}) {
    const LatticeSpec spec = build_lattice(model, jumps, n);
    return detail::backward_sweep(model, payoff, spec, opts, true,
                                  [&rule](int k, std::span<const double> s, double imm, double cont, bool& ex) {
                                      ex = rule(k, s);
                                      return ex ? imm : cont;
                                  });
}

// Exhaustive Snell envelope on the non-recombining outcome tree; exact test
// oracle for tiny instances.
inline double enumerate_stopping_oracle(const MertonModel& model, const Payoff& payoff, int n,
                                        const DiscreteJumpLaw& jumps) {
    if (n > 3) fail("TooLarge", "oracle supports n <= 3");
    const LatticeSpec spec = build_lattice(model, jumps, n);
    if (spec.branch_count() > 12) fail("TooLarge", "oracle supports (d+1)(J+1) <= 12");

    const int d = spec.d;
    auto rec = [&](auto&& self, int k, const std::vector<double>& s) -> double {
        const double imm = std::exp(-spec.rate * k * spec.dt) * payoff_eval(payoff, s, k * spec.dt);
        if (k == spec.n) return imm;
        NeumaierSum cs;
        std::vector<double> s2(static_cast<std::size_t>(d));
        for (int b = 0; b < spec.branch_count(); ++b) {
            for (int i = 0; i < d; ++i)
                s2[static_cast<std::size_t>(i)] =
                    s[static_cast<std::size_t>(i)] *
                    spec.branch_factor[static_cast<std::size_t>(b) * d + static_cast<std::size_t>(i)];
            cs.add(spec.branch_prob[static_cast<std::size_t>(b)] * self(self, k + 1, s2));
        }
        const double cont = cs.value();
        return imm >= cont ? imm : cont;
    };
    return rec(rec, 0, model.spot);
}

} // namespace mjd
