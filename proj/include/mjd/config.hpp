#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mjd/convergence.hpp"
#include "mjd/errors.hpp"
#include "mjd/lattice.hpp"
#include "mjd/model.hpp"
#include "mjd/montecarlo.hpp"

namespace mjd {

using nlohmann::json;

struct JumpsConfig {
    std::string type; // "discrete" | "sampler"
    std::vector<std::vector<double>> values;
    std::vector<double> probs;
    std::string name; // sampler: "uniform"
    std::vector<double> lo;
    std::vector<double> hi;

    bool operator==(const JumpsConfig&) const = default;
};

struct ModelConfig {
    std::vector<double> spot;
    double rate = 0.0;
    double horizon = 0.0;
    std::vector<std::vector<double>> vol;
    double intensity = 0.0;
    std::optional<JumpsConfig> jumps;

    bool operator==(const ModelConfig&) const = default;
};

struct PayoffConfig {
    std::string family;
    double strike = 0.0;
    std::vector<double> weights;

    bool operator==(const PayoffConfig&) const = default;
};

struct EngineConfig {
    std::optional<int> n;
    std::vector<int> n_list;
    std::string jump_mode = "native"; // "native" | "discretized"
    std::uint64_t state_budget = 50'000'000;
    std::string reference_mode = "richardson"; // converge: "closed_form" | "mc" | "richardson"

    bool operator==(const EngineConfig&) const = default;
};

struct McBlockConfig {
    std::uint64_t paths = 100000;
    int steps = 50;
    std::uint64_t seed = 1;
    int basis_degree = 2;

    bool operator==(const McBlockConfig&) const = default;
};

struct OutputConfig {
    std::string csv;
    int precision = 12;

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    ModelConfig model;
    PayoffConfig payoff;
    EngineConfig engine;
    McBlockConfig mc;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;
};

namespace cfg {

[[noreturn]] inline void bad(const std::string& path, const std::string& why) {
    fail("ConfigError", path + ": " + why);
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) bad(path + "." + key, "unknown key");
    }
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) bad(path + "." + key, "missing key");
    return obj.at(key);
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    return v.get<double>();
}

inline int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(path, "expected an integer");
    return v.get<int>();
}

inline std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<double>() < 0) bad(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) bad(path, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> as_vector(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<std::vector<double>> as_matrix(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_vector(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

} // namespace cfg

inline RunConfig parse_config(const json& root) {
    if (!root.is_object()) cfg::bad("config", "top level must be an object");
    cfg::check_keys(root, "config", {"model", "payoff", "engine", "mc", "output"});

    RunConfig rc;

    const json& jm = cfg::require(root, "config", "model");
    if (!jm.is_object()) cfg::bad("model", "expected an object");
    cfg::check_keys(jm, "model", {"spot", "rate", "horizon", "vol", "intensity", "jumps"});
    rc.model.spot = cfg::as_vector(cfg::require(jm, "model", "spot"), "model.spot");
    rc.model.rate = cfg::as_number(cfg::require(jm, "model", "rate"), "model.rate");
    rc.model.horizon = cfg::as_number(cfg::require(jm, "model", "horizon"), "model.horizon");
    rc.model.vol = cfg::as_matrix(cfg::require(jm, "model", "vol"), "model.vol");
    rc.model.intensity = cfg::as_number(cfg::require(jm, "model", "intensity"), "model.intensity");
    if (jm.contains("jumps")) {
        const json& jj = jm.at("jumps");
        if (!jj.is_object()) cfg::bad("model.jumps", "expected an object");
        JumpsConfig jc;
        jc.type = cfg::as_string(cfg::require(jj, "model.jumps", "type"), "model.jumps.type");
        if (jc.type == "discrete") {
            cfg::check_keys(jj, "model.jumps", {"type", "values", "probs"});
            jc.values = cfg::as_matrix(cfg::require(jj, "model.jumps", "values"), "model.jumps.values");
            jc.probs = cfg::as_vector(cfg::require(jj, "model.jumps", "probs"), "model.jumps.probs");
        } else if (jc.type == "sampler") {
            cfg::check_keys(jj, "model.jumps", {"type", "name", "lo", "hi"});
            jc.name = cfg::as_string(cfg::require(jj, "model.jumps", "name"), "model.jumps.name");
            if (jc.name != "uniform") cfg::bad("model.jumps.name", "unknown sampler '" + jc.name + "'");
            jc.lo = cfg::as_vector(cfg::require(jj, "model.jumps", "lo"), "model.jumps.lo");
            jc.hi = cfg::as_vector(cfg::require(jj, "model.jumps", "hi"), "model.jumps.hi");
        } else {
            cfg::bad("model.jumps.type", "expected 'discrete' or 'sampler'");
        }
        rc.model.jumps = std::move(jc);
    } else if (rc.model.intensity > 0.0) {
        cfg::bad("model.jumps", "missing key (required when intensity > 0)");
    }

    const json& jp = cfg::require(root, "config", "payoff");
    if (!jp.is_object()) cfg::bad("payoff", "expected an object");
    cfg::check_keys(jp, "payoff", {"family", "strike", "weights"});
    rc.payoff.family = cfg::as_string(cfg::require(jp, "payoff", "family"), "payoff.family");
    rc.payoff.strike = cfg::as_number(cfg::require(jp, "payoff", "strike"), "payoff.strike");
    if (jp.contains("weights")) rc.payoff.weights = cfg::as_vector(jp.at("weights"), "payoff.weights");

    const json& je = cfg::require(root, "config", "engine");
    if (!je.is_object()) cfg::bad("engine", "expected an object");
    cfg::check_keys(je, "engine", {"n", "n_list", "jump_mode", "state_budget", "reference_mode"});
    if (je.contains("n")) rc.engine.n = cfg::as_int(je.at("n"), "engine.n");
    if (je.contains("n_list")) {
        if (!je.at("n_list").is_array()) cfg::bad("engine.n_list", "expected an array of integers");
        for (std::size_t i = 0; i < je.at("n_list").size(); ++i)
            rc.engine.n_list.push_back(
                cfg::as_int(je.at("n_list")[i], "engine.n_list[" + std::to_string(i) + "]"));
    }
    if (je.contains("jump_mode")) {
        rc.engine.jump_mode = cfg::as_string(je.at("jump_mode"), "engine.jump_mode");
        if (rc.engine.jump_mode != "native" && rc.engine.jump_mode != "discretized")
            cfg::bad("engine.jump_mode", "expected 'native' or 'discretized'");
    }
    if (je.contains("state_budget"))
        rc.engine.state_budget = cfg::as_u64(je.at("state_budget"), "engine.state_budget");
    if (je.contains("reference_mode")) {
        rc.engine.reference_mode = cfg::as_string(je.at("reference_mode"), "engine.reference_mode");
        if (rc.engine.reference_mode != "closed_form" && rc.engine.reference_mode != "mc" &&
            rc.engine.reference_mode != "richardson")
            cfg::bad("engine.reference_mode", "expected 'closed_form', 'mc' or 'richardson'");
    }

    if (root.contains("mc")) {
        const json& jq = root.at("mc");
        if (!jq.is_object()) cfg::bad("mc", "expected an object");
        cfg::check_keys(jq, "mc", {"paths", "steps", "seed", "basis_degree"});
        if (jq.contains("paths")) rc.mc.paths = cfg::as_u64(jq.at("paths"), "mc.paths");
        if (jq.contains("steps")) rc.mc.steps = cfg::as_int(jq.at("steps"), "mc.steps");
        if (jq.contains("seed")) rc.mc.seed = cfg::as_u64(jq.at("seed"), "mc.seed");
        if (jq.contains("basis_degree"))
            rc.mc.basis_degree = cfg::as_int(jq.at("basis_degree"), "mc.basis_degree");
    }

    if (root.contains("output")) {
        const json& jo = root.at("output");
        if (!jo.is_object()) cfg::bad("output", "expected an object");
        cfg::check_keys(jo, "output", {"csv", "precision"});
        if (jo.contains("csv")) rc.output.csv = cfg::as_string(jo.at("csv"), "output.csv");
        if (jo.contains("precision")) {
            rc.output.precision = cfg::as_int(jo.at("precision"), "output.precision");
            if (rc.output.precision < 1 || rc.output.precision > 17)
                cfg::bad("output.precision", "expected 1..17");
        }
    }
    return rc;
}

inline json to_json(const RunConfig& rc) {
    json root;
    json& jm = root["model"];
    jm["spot"] = rc.model.spot;
    jm["rate"] = rc.model.rate;
    jm["horizon"] = rc.model.horizon;
    jm["vol"] = rc.model.vol;
    jm["intensity"] = rc.model.intensity;
    if (rc.model.jumps) {
        json& jj = jm["jumps"];
        jj["type"] = rc.model.jumps->type;
        if (rc.model.jumps->type == "discrete") {
            jj["values"] = rc.model.jumps->values;
            jj["probs"] = rc.model.jumps->probs;
        } else {
            jj["name"] = rc.model.jumps->name;
            jj["lo"] = rc.model.jumps->lo;
            jj["hi"] = rc.model.jumps->hi;
        }
    }
    json& jp = root["payoff"];
    jp["family"] = rc.payoff.family;
    jp["strike"] = rc.payoff.strike;
    if (!rc.payoff.weights.empty()) jp["weights"] = rc.payoff.weights;
    json& je = root["engine"];
    if (rc.engine.n) je["n"] = *rc.engine.n;
    if (!rc.engine.n_list.empty()) je["n_list"] = rc.engine.n_list;
    je["jump_mode"] = rc.engine.jump_mode;
    je["state_budget"] = rc.engine.state_budget;
    je["reference_mode"] = rc.engine.reference_mode;
    json& jq = root["mc"];
    jq["paths"] = rc.mc.paths;
    jq["steps"] = rc.mc.steps;
    jq["seed"] = rc.mc.seed;
    jq["basis_degree"] = rc.mc.basis_degree;
    json& jo = root["output"];
    jo["csv"] = rc.output.csv;
    jo["precision"] = rc.output.precision;
    return root;
}

// config -> validated domain objects

inline MertonModel build_model(const ModelConfig& mc) {
    MertonModel m;
    m.spot = mc.spot;
    m.rate = mc.rate;
    m.horizon = mc.horizon;
    m.vol = mc.vol;
    m.intensity = mc.intensity;
    if (mc.jumps) {
        JumpLaw law;
        if (mc.jumps->type == "discrete") {
            law.kind = JumpLaw::Kind::discrete;
            law.values = mc.jumps->values;
            law.probs = mc.jumps->probs;
        } else {
            law.kind = JumpLaw::Kind::uniform_sampler;
            law.lo = mc.jumps->lo;
            law.hi = mc.jumps->hi;
        }
        m.jumps = std::move(law);
    }
    return validate_model(std::move(m));
}

inline Payoff build_payoff(const PayoffConfig& pc, int d) {
    PayoffFamily fam;
    if (pc.family == "basket_put")
        fam = PayoffFamily::basket_put;
    else if (pc.family == "basket_call")
        fam = PayoffFamily::basket_call;
    else if (pc.family == "max_call")
        fam = PayoffFamily::max_call;
    else if (pc.family == "min_put")
        fam = PayoffFamily::min_put;
    else if (pc.family == "constant")
        fam = PayoffFamily::constant;
    else
        cfg::bad("payoff.family", "unknown family '" + pc.family + "'");
    const bool basket = fam == PayoffFamily::basket_put || fam == PayoffFamily::basket_call;
    if (basket && static_cast<int>(pc.weights.size()) != d)
        cfg::bad("payoff.weights", "expected " + std::to_string(d) + " weights");
    return make_payoff(fam, pc.strike, pc.weights);
}

inline JumpMode parse_jump_mode(const std::string& s) {
    if (s == "native") return JumpMode::native;
    if (s == "discretized") return JumpMode::discretized;
    cfg::bad("engine.jump_mode", "expected 'native' or 'discretized'");
}

inline ReferenceMode parse_reference_mode(const std::string& s) {
    if (s == "closed_form") return ReferenceMode::closed_form;
    if (s == "mc") return ReferenceMode::mc;
    if (s == "richardson") return ReferenceMode::richardson;
    cfg::bad("engine.reference_mode", "expected 'closed_form', 'mc' or 'richardson'");
}

// ---------------------------------------------------------------------------
// CSV schema (owned here, emitted by the CLI and the convergence module)

inline std::string format_sig(double x, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    return buf;
}

// data rows n,value,error,ref,ref_kind,seconds then footer rows
// fitted_C / fitted_beta / residual
inline std::string converge_csv(const ConvergenceReport& rep, int precision) {
    std::string out = "n,value,error,ref,ref_kind,seconds\n";
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        out += std::to_string(rep.points[i].n);
        out += ',';
        out += format_sig(rep.points[i].value, precision);
        out += ',';
        out += format_sig(rep.errors[i], precision);
        out += ',';
        out += format_sig(rep.reference, precision);
        out += ',';
        out += to_string(rep.ref_kind);
        out += ',';
        out += format_sig(rep.points[i].seconds, 3);
        out += '\n';
    }
    const char* nan = "nan";
    out += "fitted_C,";
    out += rep.has_fit ? format_sig(rep.fit.c, precision) : nan;
    out += "\nfitted_beta,";
    out += rep.has_fit ? format_sig(rep.fit.beta, precision) : nan;
    out += "\nresidual,";
    out += rep.has_fit ? format_sig(rep.fit.residual, precision) : nan;
    out += '\n';
    return out;
}

inline std::string price_csv_row(int n, double value, double seconds, int precision) {
    std::string out = "n,value,error,ref,ref_kind,seconds\n";
    out += std::to_string(n);
    out += ',';
    out += format_sig(value, precision);
    out += ",,,,";
    out += format_sig(seconds, 3);
    out += '\n';
    return out;
}

} // namespace mjd
