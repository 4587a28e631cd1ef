#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mjd/config.hpp"
#include "mjd/convergence.hpp"
#include "mjd/lattice.hpp"
#include "mjd/model.hpp"
#include "mjd/pricer.hpp"
#include "mjd/selftest.hpp"

namespace {

struct Overrides {
    std::optional<int> n;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> jump_mode;
    int threads = 0;
};

mjd::RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) mjd::fail("ConfigError", "cannot read config file '" + path + "'");
    mjd::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        mjd::fail("ConfigError", std::string("invalid JSON: ") + e.what());
    }
    return mjd::parse_config(j);
}

void apply_overrides(mjd::RunConfig& rc, const Overrides& ov) {
    if (ov.n) rc.engine.n = *ov.n;
    if (ov.seed) rc.mc.seed = *ov.seed;
    if (ov.out) rc.output.csv = *ov.out;
    if (ov.jump_mode) rc.engine.jump_mode = *ov.jump_mode;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) mjd::fail("ConfigError", "cannot write '" + path + "'");
    out << text;
}

mjd::DiscreteJumpLaw resolve_jumps(const mjd::MertonModel& model, const mjd::RunConfig& rc, int n) {
    if (model.intensity == 0.0) return {};
    mjd::DiscretizeOptions dopt;
    dopt.tail_samples = std::max<std::uint64_t>(rc.mc.paths, 100000);
    dopt.seed = rc.mc.seed;
    return mjd::discretize_jumps(*model.jumps, n, mjd::parse_jump_mode(rc.engine.jump_mode), dopt);
}

int run_price(const std::string& config_path, const Overrides& ov) {
    mjd::RunConfig rc = load_config(config_path);
    apply_overrides(rc, ov);
    if (!rc.engine.n) mjd::fail("ConfigError", "engine.n: missing key (or pass --n)");
    const int n = *rc.engine.n;

    const mjd::MertonModel model = mjd::build_model(rc.model);
    const mjd::Payoff payoff = mjd::build_payoff(rc.payoff, model.d);
    const mjd::DiscreteJumpLaw jumps = resolve_jumps(model, rc, n);

    mjd::PricerOptions opts;
    opts.state_budget = rc.engine.state_budget;
    opts.threads = ov.threads;
    const mjd::PricingResult res = mjd::price_american(model, payoff, n, jumps, opts);

    std::uint64_t total = 0;
    for (std::uint64_t s : res.states_per_step) total += s;
    const int prec = rc.output.precision;
    std::cout << "n: " << res.n << "\n";
    std::cout << "value: " << mjd::format_sig(res.value, prec) << "\n";
    std::cout << "intrinsic: " << mjd::format_sig(mjd::payoff_eval(payoff, model.spot, 0.0), prec)
              << "\n";
    std::cout << "exercise_at_root: " << (res.exercise_at_root ? "yes" : "no") << "\n";
    std::cout << "states_final: " << res.states_per_step.back() << "\n";
    std::cout << "states_total: " << total << "\n";
    std::cout << "jump_mode: " << rc.engine.jump_mode << "\n";
    std::cout << "seed: " << rc.mc.seed << "\n";
    std::cout << "seconds: " << mjd::format_sig(res.seconds, 3) << "\n";

    if (!rc.output.csv.empty())
        write_file(rc.output.csv, mjd::price_csv_row(res.n, res.value, res.seconds, prec));
    return 0;
}

int run_converge(const std::string& config_path, const Overrides& ov) {
    mjd::RunConfig rc = load_config(config_path);
    apply_overrides(rc, ov);
    if (rc.engine.n_list.empty()) mjd::fail("ConfigError", "engine.n_list: missing key");

    const mjd::MertonModel model = mjd::build_model(rc.model);
    const mjd::Payoff payoff = mjd::build_payoff(rc.payoff, model.d);

    mjd::MCConfig mc;
    mc.paths = rc.mc.paths;
    mc.steps = rc.mc.steps;
    mc.seed = rc.mc.seed;
    mc.basis_degree = rc.mc.basis_degree;
    mc.threads = ov.threads;

    mjd::PricerOptions opts;
    opts.state_budget = rc.engine.state_budget;
    opts.threads = ov.threads;

    const mjd::ConvergenceReport rep =
        mjd::run_study(model, payoff, mjd::parse_jump_mode(rc.engine.jump_mode), rc.engine.n_list,
                       mjd::parse_reference_mode(rc.engine.reference_mode), mc, opts);

    const std::string csv = mjd::converge_csv(rep, rc.output.precision);
    const bool csv_to_stdout = rc.output.csv.empty();
    std::ostream& info = csv_to_stdout ? std::cerr : std::cout;
    if (csv_to_stdout)
        std::cout << csv;
    else
        write_file(rc.output.csv, csv);

    const int prec = rc.output.precision;
    info << "reference: " << mjd::format_sig(rep.reference, prec) << " (" << to_string(rep.ref_kind)
         << ")";
    if (rep.ref_kind == mjd::ReferenceKind::mc_ci)
        info << " ci99_half " << mjd::format_sig(rep.ref_ci_half, prec);
    info << "\n";
    if (rep.exact_agreement)
        info << "fit: exact agreement (all errors < 1e-14)\n";
    else if (rep.has_fit)
        info << "fit: C " << mjd::format_sig(rep.fit.c, prec) << ", beta "
             << mjd::format_sig(rep.fit.beta, prec) << ", residual "
             << mjd::format_sig(rep.fit.residual, prec) << "\n";
    else
        info << "fit: not available (fewer than two positive errors)\n";
    info << "shape_sup: " << mjd::format_sig(rep.shape_sup, prec) << "\n";
    info << "inversions: " << rep.inversions << "\n";
    if (rep.has_lsmc)
        info << "lsmc: " << mjd::format_sig(rep.lsmc.mean, prec) << " +- "
             << mjd::format_sig(rep.lsmc.std_error, prec) << " (99% half-width "
             << mjd::format_sig(rep.lsmc.ci99_half, prec) << ")\n";
    info << "seed: " << rep.seed << "\n";
    return 0;
}

int run_selftest(bool corrupt_xi) {
    mjd::SelftestOptions opts;
    opts.corrupt_xi = corrupt_xi;
    const auto checks = mjd::run_selftest(opts);
    int failures = 0;
    for (const auto& c : checks) {
        if (c.pass)
            std::cout << "ok   " << c.name << " — " << c.detail << "\n";
        else {
            std::cout << "FAIL " << c.name << " — " << c.detail << "\n";
            ++failures;
        }
    }
    std::cout << (checks.size() - failures) << "/" << checks.size() << " checks passed\n";
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"American option pricing in the multidimensional Merton jump-diffusion model "
                 "via recombining multinomial lattices"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    bool corrupt_xi = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config path")->required();
        cmd->add_option("--n", ov.n, "override engine.n");
        cmd->add_option("--seed", ov.seed, "override mc.seed");
        cmd->add_option("--out", ov.out, "override output.csv path");
        cmd->add_option("--jump-mode", ov.jump_mode, "native|discretized")
            ->check(CLI::IsMember({"native", "discretized"}));
        cmd->add_option("--threads", ov.threads, "worker threads (default: all cores)");
    };

    CLI::App* price = app.add_subcommand("price", "price the American contract at engine.n");
    add_common(price);
    CLI::App* conv = app.add_subcommand("converge", "price the n ladder and fit the error rate");
    add_common(conv);
    CLI::App* self = app.add_subcommand("selftest", "run the embedded invariant suite");
    self->add_flag("--corrupt-xi", corrupt_xi)->group(""); // test hook, hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (price->parsed()) return run_price(config_path, ov);
        if (conv->parsed()) return run_converge(config_path, ov);
        return run_selftest(corrupt_xi);
    } catch (const mjd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == "ConfigError" ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
