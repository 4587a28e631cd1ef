#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "mjd/config.hpp"

using namespace mjd;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args, const std::string& tag) {
    const std::string out = "cli_" + tag + ".out";
    const std::string err = "cli_" + tag + ".err";
    const std::string cmd = std::string(MJD_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    std::remove(out.c_str());
    std::remove(err.c_str());
    return r;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::string config_dir() { return MJD_CONFIG_DIR; }

// drops the trailing seconds column of every csv data row (wall time is the
// one field exempt from byte-identity)
std::string strip_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        const auto commas = std::count(line.begin(), line.end(), ',');
        if (commas == 5) line = line.substr(0, line.rfind(','));
        out += line;
        out += '\n';
    }
    return out;
}

} // namespace

TEST_CASE("config json round-trips to the identical structure") {
    const std::string text = slurp(config_dir() + "/basket_put_2d.json");
    REQUIRE(!text.empty());
    const RunConfig a = parse_config(json::parse(text));
    const RunConfig b = parse_config(to_json(a));
    CHECK(a == b);
    const RunConfig c = parse_config(json::parse(to_json(b).dump()));
    CHECK(a == c);
}

TEST_CASE("schema violations carry their field path") {
    json j = json::parse(slurp(config_dir() + "/bs_put_1d.json"));
    j["model"].erase("vol");
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("model.vol"), Error);

    json k = json::parse(slurp(config_dir() + "/bs_put_1d.json"));
    k["model"]["volatility"] = 0.2;
    CHECK_THROWS_WITH_AS(parse_config(k), doctest::Contains("model.volatility"), Error);

    json u = json::parse(slurp(config_dir() + "/bs_put_1d.json"));
    u["extra"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(u), doctest::Contains("unknown key"), Error);

    json t = json::parse(slurp(config_dir() + "/bs_put_1d.json"));
    t["model"]["rate"] = "high";
    CHECK_THROWS_WITH_AS(parse_config(t), doctest::Contains("model.rate"), Error);
}

TEST_CASE("csv numbers use the configured significant digits") {
    CHECK(format_sig(0.123456789012345, 12) == "0.123456789012");
    CHECK(format_sig(2.0, 12) == "2");
    ConvergenceReport rep;
    rep.points = {{8, 0.1, 0.01}, {16, 0.2, 0.02}, {32, 0.25, 0.04}};
    rep.errors = {0.15, 0.05, 0.0};
    rep.reference = 0.25;
    rep.ref_kind = ReferenceKind::black_scholes;
    rep.has_fit = true;
    rep.fit = {1.25, 0.5, 0.0};
    const std::string csv = converge_csv(rep, 12);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 7); // header + 3 data + 3 footer
    CHECK(lines[0] == "n,value,error,ref,ref_kind,seconds");
    CHECK(lines[1].substr(0, 2) == "8,");
    CHECK(lines[4] == "fitted_C,1.25");
    CHECK(lines[5] == "fitted_beta,0.5");
    CHECK(lines[6] == "residual,0");
}

TEST_CASE("price command prints the hand example value") {
    const CliResult r = run_cli("price --config " + config_dir() + "/hand_put_n1.json", "hand");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("value: 0.5\n") != std::string::npos);
    CHECK(r.out.find("n: 1") != std::string::npos);
    CHECK(r.out.find("seed: 7") != std::string::npos);
    CHECK(r.out.find("states_total: 3") != std::string::npos);
}

TEST_CASE("price command prints the strike for a constant payoff") {
    write_text("cli_const.json", R"({
      "model": {"spot": [1.0], "rate": 0.05, "horizon": 1.0, "vol": [[0.2]], "intensity": 0.0},
      "payoff": {"family": "constant", "strike": 2.75},
      "engine": {"n": 16, "jump_mode": "native"}
    })");
    const CliResult r = run_cli("price --config cli_const.json", "const");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("value: 2.75\n") != std::string::npos);
    CHECK(r.out.find("exercise_at_root: yes") != std::string::npos);
    std::remove("cli_const.json");
}

TEST_CASE("missing keys exit 2 and name the field") {
    write_text("cli_novol.json", R"({
      "model": {"spot": [1.0], "rate": 0.05, "horizon": 1.0, "intensity": 0.0},
      "payoff": {"family": "constant", "strike": 1.0},
      "engine": {"n": 4}
    })");
    const CliResult r = run_cli("price --config cli_novol.json", "novol");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("model.vol") != std::string::npos);
    std::remove("cli_novol.json");

    const CliResult gone = run_cli("price --config does_not_exist.json", "gone");
    CHECK(gone.exit_code == 2);
}

TEST_CASE("engine errors exit 3 and name the typed error") {
    write_text("cli_neg.json", R"({
      "model": {"spot": [1.0], "rate": 0.05, "horizon": 1.0, "vol": [[1.5]], "intensity": 0.0},
      "payoff": {"family": "basket_put", "strike": 1.0, "weights": [1.0]},
      "engine": {"n": 1, "jump_mode": "native"}
    })");
    const CliResult r = run_cli("price --config cli_neg.json", "neg");
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("NegativeDiffusionFactor") != std::string::npos);
    std::remove("cli_neg.json");
}

TEST_CASE("flag overrides replace config values") {
    const CliResult r =
        run_cli("price --config " + config_dir() + "/bs_put_1d.json --n 32 --seed 99", "ovr");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("n: 32") != std::string::npos);
    CHECK(r.out.find("seed: 99") != std::string::npos);
}

TEST_CASE("price writes a csv row when an output path is set") {
    const CliResult r = run_cli("price --config " + config_dir() +
                                    "/hand_put_n1.json --out cli_price.csv",
                                "pricecsv");
    CHECK(r.exit_code == 0);
    const std::string csv = slurp("cli_price.csv");
    CHECK(csv.rfind("n,value,error,ref,ref_kind,seconds\n1,0.5,,,,", 0) == 0);
    std::remove("cli_price.csv");
}

TEST_CASE("converge emits the row contract and reruns byte-identically") {
    write_text("cli_ladder.json", R"({
      "model": {"spot": [1.0], "rate": 0.05, "horizon": 1.0, "vol": [[0.2]], "intensity": 0.0},
      "payoff": {"family": "basket_call", "strike": 1.0, "weights": [1.0]},
      "engine": {"n_list": [8, 16, 32], "jump_mode": "native", "reference_mode": "closed_form"},
      "mc": {"seed": 20260808}
    })");
    const CliResult a = run_cli("converge --config cli_ladder.json", "ladd_a");
    CHECK(a.exit_code == 0);
    std::istringstream in(a.out);
    std::string line;
    int rows = 0, footers = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line == "n,value,error,ref,ref_kind,seconds") {
            header = true;
        } else if (line.rfind("fitted_", 0) == 0 || line.rfind("residual,", 0) == 0) {
            ++footers;
        } else if (!line.empty()) {
            ++rows;
        }
    }
    CHECK(header);
    CHECK(rows == 3);
    CHECK(footers == 3);
    CHECK(a.err.find("seed: 20260808") != std::string::npos);

    const CliResult b = run_cli("converge --config cli_ladder.json", "ladd_b");
    CHECK(strip_seconds(a.out) == strip_seconds(b.out));

    // beta footer equals an independent refit of the emitted rows
    std::vector<std::pair<double, double>> pts;
    std::istringstream again(a.out);
    double beta_footer = 0.0;
    while (std::getline(again, line)) {
        if (line.rfind("fitted_beta,", 0) == 0) beta_footer = std::stod(line.substr(12));
        if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) {
            std::istringstream row(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(row, field, ',')) fields.push_back(field);
            pts.emplace_back(std::stod(fields[0]), std::stod(fields[2]));
        }
    }
    const RateFit refit = fit_rate(pts);
    CHECK(std::abs(refit.beta - beta_footer) <= 1e-9 * std::max(1.0, std::abs(refit.beta)));
    std::remove("cli_ladder.json");
}

TEST_CASE("converge accepts a csv output path") {
    const CliResult r = run_cli("converge --config " + config_dir() +
                                    "/bs_put_1d.json --out cli_study.csv",
                                "csvout");
    CHECK(r.exit_code == 0);
    const std::string csv = slurp("cli_study.csv");
    CHECK(csv.rfind("n,value,error,ref,ref_kind,seconds\n", 0) == 0);
    CHECK(csv.find("richardson") != std::string::npos);
    CHECK(r.out.find("lsmc:") != std::string::npos);
    std::remove("cli_study.csv");
}

TEST_CASE("selftest passes, is sized, and honors the corruption hook") {
    const CliResult ok = run_cli("selftest", "self");
    CHECK(ok.exit_code == 0);
    int checks = 0;
    std::istringstream in(ok.out);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("ok   ", 0) == 0) ++checks;
    CHECK(checks >= 10);

    const CliResult bad = run_cli("selftest --corrupt-xi", "selfbad");
    CHECK(bad.exit_code == 1);
    CHECK(bad.out.find("FAIL xi_moments_d1") != std::string::npos);
}
