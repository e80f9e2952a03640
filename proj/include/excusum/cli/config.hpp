#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "excusum/conditions.hpp"
#include "excusum/detectors.hpp"
#include "excusum/error.hpp"
#include "excusum/models.hpp"
#include "excusum/process.hpp"
#include "excusum/schedule.hpp"

namespace excusum::cli {

using nlohmann::json;

struct OutputConfig {
    std::string directory = ".";
    std::vector<std::string> formats{"csv"};
};

/// Parsed experiment configuration. Optional fields fall back to
/// per-command defaults.
struct ExperimentConfig {
    MeanSchedule schedule = MeanSchedule::arctangent();
    DetectorKind detector = DetectorKind::ExCusum;
    std::optional<double> threshold;
    std::optional<double> gamma;
    std::optional<std::size_t> window;
    std::optional<ChangePoint> nu;
    std::optional<std::uint64_t> horizon;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> cadd_trials;
    std::vector<std::uint64_t> nu_grid;
    std::vector<double> gammas;
    ConditionBudgets budgets;
    OutputConfig output;

    GaussianModel model() const { return GaussianModel(schedule); }

    /// Threshold A: `threshold` if set, else log(gamma), else `fallback`.
    double threshold_or(double fallback) const {
        if (threshold) return *threshold;
        if (gamma) return std::log(*gamma);
        return fallback;
    }

    std::uint64_t require_seed() const {
        if (!seed) throw ConfigError("seed", "required (set it in the config or pass --seed)");
        return *seed;
    }
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void reject_unknown(const json& object, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!object.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "must be an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : object.items()) {
        if (!keys.count(key)) throw ConfigError(join(path, key), "unknown field");
    }
}

inline double get_real(const json& value, const std::string& path) {
    if (!value.is_number()) throw ConfigError(path, "must be a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
}

inline std::uint64_t get_uint(const json& value, const std::string& path, std::uint64_t min = 0) {
    if (!value.is_number_integer()) throw ConfigError(path, "must be an integer");
    if (value.is_number_unsigned()) {
        const auto v = value.get<std::uint64_t>();
        if (v < min) throw ConfigError(path, "must be >= " + std::to_string(min));
        return v;
    }
    const auto v = value.get<std::int64_t>();
    if (v < 0 || static_cast<std::uint64_t>(v) < min) {
        throw ConfigError(path, "must be >= " + std::to_string(min));
    }
    return static_cast<std::uint64_t>(v);
}

inline std::optional<double> param(const json& params, const std::string& path, const char* name) {
    if (params.is_null() || !params.contains(name)) return std::nullopt;
    return get_real(params.at(name), join(path, name));
}

inline MeanSchedule parse_schedule(const json& s, const std::string& path) {
    reject_unknown(s, path, {"kind", "mu", "params", "table"});
    if (!s.contains("kind") || !s.at("kind").is_string()) {
        throw ConfigError(join(path, "kind"), "required string");
    }
    const std::string kind = s.at("kind").get<std::string>();
    const json params = s.value("params", json());
    const std::string ppath = join(path, "params");
    if (!params.is_null() && !params.is_object()) throw ConfigError(ppath, "must be an object");
    auto mu = [&]() -> std::optional<double> {
        if (!s.contains("mu")) return std::nullopt;
        const double v = get_real(s.at("mu"), join(path, "mu"));
        if (v < 0.0) throw ConfigError(join(path, "mu"), "must be >= 0");
        return v;
    };
    auto only_params = [&](std::initializer_list<const char*> allowed) {
        if (!params.is_null()) reject_unknown(params, ppath, allowed);
    };
    auto need_mu = [&]() {
        auto v = mu();
        if (!v) throw ConfigError(join(path, "mu"), "required for schedule kind '" + kind + "'");
        return *v;
    };
    if (kind != "explicit-table" && s.contains("table")) {
        throw ConfigError(join(path, "table"), "only valid for kind 'explicit-table'");
    }
    try {
        if (kind == "constant") {
            only_params({});
            return MeanSchedule::constant(need_mu());
        }
        if (kind == "arctangent") {
            only_params({"rate"});
            return MeanSchedule::arctangent(mu().value_or(std::numbers::pi / 2.0),
                                            param(params, ppath, "rate").value_or(1.0));
        }
        if (kind == "linear-saturating") {
            only_params({"slope"});
            auto slope = param(params, ppath, "slope");
            if (!slope) throw ConfigError(join(ppath, "slope"), "required for linear-saturating");
            return MeanSchedule::linear_saturating(*slope, need_mu());
        }
        if (kind == "geometric-approach") {
            only_params({"ratio"});
            auto ratio = param(params, ppath, "ratio");
            if (!ratio) throw ConfigError(join(ppath, "ratio"), "required for geometric-approach");
            return MeanSchedule::geometric_approach(need_mu(), *ratio);
        }
        if (kind == "explicit-table") {
            only_params({});
            if (s.contains("mu")) throw ConfigError(join(path, "mu"), "not used by explicit-table; the limit is the last entry");
            if (!s.contains("table") || !s.at("table").is_array() || s.at("table").empty()) {
                throw ConfigError(join(path, "table"), "required non-empty array");
            }
            std::vector<double> values;
            for (std::size_t i = 0; i < s.at("table").size(); ++i) {
                values.push_back(get_real(s.at("table")[i], join(path, "table") + "[" + std::to_string(i) + "]"));
            }
            return MeanSchedule::table(std::move(values));
        }
    } catch (const std::invalid_argument& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(path, e.what());
    }
    throw ConfigError(join(path, "kind"), "unknown schedule kind '" + kind + "'");
}

inline void parse_budgets(const json& b, ConditionBudgets& out) {
    const std::string path = "budgets";
    reject_unknown(b, path,
                   {"cesaro_n_max", "mlr_max_index", "grid_points", "moment_ks", "moment_trials", "slln_grid",
                    "slln_trials", "dominance_k_small", "dominance_k_large", "dominance_n", "dominance_trials"});
    auto uint_list = [&](const char* key, std::vector<std::size_t>& dest) {
        if (!b.contains(key)) return;
        const auto& arr = b.at(key);
        const std::string p = join(path, key);
        if (!arr.is_array() || arr.empty()) throw ConfigError(p, "must be a non-empty array");
        dest.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            dest.push_back(get_uint(arr[i], p + "[" + std::to_string(i) + "]", 1));
        }
    };
    auto uint_field = [&](const char* key, std::size_t& dest, std::uint64_t min) {
        if (b.contains(key)) dest = get_uint(b.at(key), join(path, key), min);
    };
    uint_field("cesaro_n_max", out.cesaro_n_max, 1);
    if (b.contains("mlr_max_index")) {
        out.mlr_max_index = static_cast<std::ptrdiff_t>(get_uint(b.at("mlr_max_index"), "budgets.mlr_max_index"));
    }
    uint_field("grid_points", out.grid_points, 2);
    uint_list("moment_ks", out.moment_ks);
    uint_field("moment_trials", out.moment_trials, 2);
    uint_list("slln_grid", out.slln_grid);
    uint_field("slln_trials", out.slln_trials, 2);
    uint_field("dominance_k_small", out.dominance_k_small, 1);
    uint_field("dominance_k_large", out.dominance_k_large, 1);
    uint_field("dominance_n", out.dominance_n, 1);
    uint_field("dominance_trials", out.dominance_trials, 1);
}

}  // namespace detail

/// Validates and converts a JSON document. Throws ConfigError naming the
/// offending field path; nothing is computed before this succeeds.
inline ExperimentConfig parse_config(const json& doc) {
    using namespace detail;
    reject_unknown(doc, "",
                   {"model", "detector", "threshold", "gamma", "window", "nu", "horizon", "seed", "trials",
                    "cadd_trials", "nu_grid", "gammas", "budgets", "output"});
    ExperimentConfig cfg;

    if (doc.contains("model")) {
        const auto& m = doc.at("model");
        reject_unknown(m, "model", {"family", "schedule"});
        if (m.contains("family")) {
            if (!m.at("family").is_string() || m.at("family").get<std::string>() != "gaussian") {
                throw ConfigError("model.family", "only \"gaussian\" is supported");
            }
        }
        if (!m.contains("schedule")) throw ConfigError("model.schedule", "required");
        cfg.schedule = parse_schedule(m.at("schedule"), "model.schedule");
    }

    if (doc.contains("detector")) {
        const auto& d = doc.at("detector");
        if (!d.is_string()) throw ConfigError("detector", "must be a string");
        auto kind = parse_detector_kind(d.get<std::string>());
        if (!kind) throw ConfigError("detector", "must be one of \"ex-cusum\", \"sr\", \"cusum\"");
        cfg.detector = *kind;
    }
    if (doc.contains("threshold") && doc.contains("gamma")) {
        throw ConfigError("gamma", "give either threshold or gamma, not both");
    }
    if (doc.contains("threshold")) cfg.threshold = get_real(doc.at("threshold"), "threshold");
    if (doc.contains("gamma")) {
        cfg.gamma = get_real(doc.at("gamma"), "gamma");
        if (*cfg.gamma <= 0.0) throw ConfigError("gamma", "must be > 0");
    }
    if (doc.contains("window") && !doc.at("window").is_null()) {
        cfg.window = get_uint(doc.at("window"), "window", 1);
        if (cfg.detector != DetectorKind::ExCusum) throw ConfigError("window", "only supported by ex-cusum");
    }
    if (doc.contains("nu")) {
        const auto& nu = doc.at("nu");
        if (nu.is_string()) {
            if (nu.get<std::string>() != "inf") throw ConfigError("nu", "must be a positive integer or \"inf\"");
            cfg.nu = ChangePoint::never();
        } else {
            cfg.nu = ChangePoint::at(get_uint(nu, "nu", 1));
        }
    }
    if (doc.contains("horizon")) cfg.horizon = get_uint(doc.at("horizon"), "horizon", 1);
    if (doc.contains("seed")) cfg.seed = get_uint(doc.at("seed"), "seed");
    if (doc.contains("trials")) cfg.trials = get_uint(doc.at("trials"), "trials", 1);
    if (doc.contains("cadd_trials")) cfg.cadd_trials = get_uint(doc.at("cadd_trials"), "cadd_trials", 1);
    if (doc.contains("nu_grid")) {
        const auto& arr = doc.at("nu_grid");
        if (!arr.is_array() || arr.empty()) throw ConfigError("nu_grid", "must be a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            cfg.nu_grid.push_back(get_uint(arr[i], "nu_grid[" + std::to_string(i) + "]", 1));
        }
    }
    if (doc.contains("gammas")) {
        const auto& arr = doc.at("gammas");
        if (!arr.is_array() || arr.empty()) throw ConfigError("gammas", "must be a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = "gammas[" + std::to_string(i) + "]";
            const double g = get_real(arr[i], p);
            if (g <= 0.0) throw ConfigError(p, "must be > 0");
            if (!cfg.gammas.empty() && g <= cfg.gammas.back()) throw ConfigError(p, "gammas must be increasing");
            cfg.gammas.push_back(g);
        }
    }
    if (doc.contains("budgets")) parse_budgets(doc.at("budgets"), cfg.budgets);
    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        reject_unknown(o, "output", {"directory", "formats"});
        if (o.contains("directory")) {
            if (!o.at("directory").is_string()) throw ConfigError("output.directory", "must be a string");
            cfg.output.directory = o.at("directory").get<std::string>();
        }
        if (o.contains("formats")) {
            const auto& arr = o.at("formats");
            if (!arr.is_array() || arr.empty()) throw ConfigError("output.formats", "must be a non-empty array");
            cfg.output.formats.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = "output.formats[" + std::to_string(i) + "]";
                if (!arr[i].is_string()) throw ConfigError(p, "must be a string");
                const auto f = arr[i].get<std::string>();
                if (f != "csv" && f != "json") throw ConfigError(p, "must be \"csv\" or \"json\"");
                cfg.output.formats.push_back(f);
            }
        }
    }
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

}  // namespace excusum::cli
