#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "excusum/cli/config.hpp"
#include "excusum/cli/io.hpp"
#include "excusum/conditions.hpp"
#include "excusum/detectors.hpp"
#include "excusum/metrics.hpp"
#include "excusum/process.hpp"

namespace excusum::cli {

/// Command-line overrides applied on top of the config file.
struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;  // "csv" | "json"
    unsigned threads = 0;
};

struct CommandResult {
    int exit_code = 0;  // 0: every verdict passed; 1: some verdict failed
    std::string summary;
    std::vector<std::filesystem::path> files;
};

inline constexpr double kDemoThreshold = 6.907755278982137;  // log(1000)
inline constexpr std::uint64_t kDemoChangePoint = 80;
inline constexpr std::uint64_t kDemoHorizon = 200;

namespace detail {

struct Resolved {
    std::uint64_t seed;
    std::filesystem::path dir;
    std::vector<std::string> formats;
};

inline Resolved resolve(const ExperimentConfig& cfg, const CommandOptions& opts) {
    Resolved r;
    r.seed = opts.seed ? *opts.seed : cfg.require_seed();
    r.dir = opts.out_dir ? *opts.out_dir : cfg.output.directory;
    if (opts.format) {
        if (*opts.format != "csv" && *opts.format != "json") {
            throw ConfigError("--format", "must be csv or json");
        }
        r.formats = {*opts.format};
    } else {
        r.formats = cfg.output.formats;
    }
    return r;
}

inline void emit(CommandResult& result, const Resolved& r, const std::string& stem, const Table& table) {
    for (const auto& f : r.formats) result.files.push_back(write_table(r.dir, stem, table, f));
}

inline bool crossed(DetectorKind kind, double statistic, double threshold) {
    return kind == DetectorKind::Cusum ? statistic >= threshold : statistic > threshold;
}

inline std::string fmt(double v, int digits = 6) {
    std::ostringstream out;
    out << std::setprecision(digits) << v;
    return out.str();
}

inline std::string statistic_name(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::ExCusum: return "W_n";
        case DetectorKind::ShiryaevRoberts: return "log R_n";
        case DetectorKind::Cusum: return "C_n";
    }
    return "statistic";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// demo / simulate

struct DemoRun {
    Path path;
    std::vector<double> statistic;
    double threshold = 0.0;
    std::optional<std::uint64_t> tau;    // first crossing within the horizon
    double max_pre_change = -std::numeric_limits<double>::infinity();  // over n < nu (all n when nu = inf)
};

/// One seeded path with its statistic trace and first crossing.
template <DensityFamily M>
DemoRun demo_run(const M& model, DetectorKind kind, double threshold, const ChangeSpec& spec,
                 std::optional<std::size_t> window = std::nullopt) {
    DemoRun run;
    run.path = generate_path(model, spec);
    run.threshold = threshold;
    run.statistic = statistic_trace(kind, model, std::span<const double>(run.path.samples), window);
    for (std::size_t i = 0; i < run.statistic.size(); ++i) {
        const std::uint64_t n = i + 1;
        if (spec.nu.before_change(n)) run.max_pre_change = std::max(run.max_pre_change, run.statistic[i]);
        if (!run.tau && detail::crossed(kind, run.statistic[i], threshold)) run.tau = n;
    }
    return run;
}

inline ChangeSpec demo_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
    ChangeSpec spec;
    spec.nu = cfg.nu.value_or(ChangePoint::at(kDemoChangePoint));
    spec.horizon = cfg.horizon.value_or(kDemoHorizon);
    spec.seed = seed;
    return spec;
}

inline CommandResult cmd_demo(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    const auto r = detail::resolve(cfg, opts);
    const auto model = cfg.model();
    const ChangeSpec spec = demo_spec(cfg, r.seed);
    const DemoRun run = demo_run(model, cfg.detector, cfg.threshold_or(kDemoThreshold), spec, cfg.window);

    CommandResult result;
    Table path{{"n", "x_n"}, {}};
    Table stat{{"n", cfg.detector == DetectorKind::ExCusum ? "W_n" : "statistic"}, {}};
    std::vector<double> ns;
    for (std::size_t i = 0; i < run.path.samples.size(); ++i) {
        const std::uint64_t n = i + 1;
        path.rows.push_back({n, run.path.samples[i]});
        stat.rows.push_back({n, run.statistic[i]});
        ns.push_back(static_cast<double>(n));
    }
    detail::emit(result, r, "demo_path", path);
    detail::emit(result, r, "demo_stat", stat);

    std::vector<Guide> change;
    if (!spec.nu.is_never()) {
        change.push_back({static_cast<double>(spec.nu.time()), "change point " + spec.nu.to_string(), "#555555"});
    }
    LineChart data_chart{"Observations", "n", "x_n", {{"x_n", ns, run.path.samples, "#1f77b4"}}, {}, change};
    LineChart stat_chart{std::string(to_string(cfg.detector)) + " statistic",
                         "n",
                         detail::statistic_name(cfg.detector),
                         {{detail::statistic_name(cfg.detector), ns, run.statistic, "#2ca02c"}},
                         {{run.threshold, "threshold A = " + detail::fmt(run.threshold, 5)}},
                         change};
    result.files.push_back(r.dir / "demo_path.svg");
    write_file(result.files.back(), data_chart.render());
    result.files.push_back(r.dir / "demo_stat.svg");
    write_file(result.files.back(), stat_chart.render());

    std::ostringstream summary;
    summary << "demo: nu=" << spec.nu.to_string() << " horizon=" << spec.horizon
            << " A=" << detail::fmt(run.threshold) << " max pre-change statistic="
            << detail::fmt(run.max_pre_change) << " tau=" << (run.tau ? std::to_string(*run.tau) : "none");
    result.summary = summary.str();
    return result;
}

inline CommandResult cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    const auto r = detail::resolve(cfg, opts);
    const auto model = cfg.model();
    const ChangeSpec spec = demo_spec(cfg, r.seed);
    const DemoRun run = demo_run(model, cfg.detector, cfg.threshold_or(kDemoThreshold), spec, cfg.window);

    CommandResult result;
    Table table{{"n", "x_n", "statistic"}, {}};
    for (std::size_t i = 0; i < run.path.samples.size(); ++i) {
        table.rows.push_back({std::uint64_t{i + 1}, run.path.samples[i], run.statistic[i]});
    }
    detail::emit(result, r, "simulate", table);
    std::ostringstream summary;
    summary << "simulate: detector=" << to_string(cfg.detector) << " nu=" << spec.nu.to_string()
            << " A=" << detail::fmt(run.threshold) << " tau="
            << (run.tau ? std::to_string(*run.tau) : "censored at " + std::to_string(spec.horizon));
    result.summary = summary.str();
    return result;
}

// ---------------------------------------------------------------------------
// verify

/// Rows of the verify trace: the moment and SLLN grids plus powers of ten.
inline Table condition_trace(const ConditionReport& report, const ConditionBudgets& budgets) {
    std::set<std::size_t> ns(budgets.moment_ks.begin(), budgets.moment_ks.end());
    ns.insert(budgets.slln_grid.begin(), budgets.slln_grid.end());
    for (std::size_t p = 1; p <= report.cesaro.averages.size(); p *= 10) ns.insert(p);
    ns.insert(report.cesaro.averages.size());
    Table table{{"n", "cesaro_avg", "moment_est", "slln_q95"}, {}};
    for (std::size_t n : ns) {
        std::vector<Cell> row{std::uint64_t{n}};
        row.push_back(n <= report.cesaro.averages.size() ? Cell{report.cesaro.at(n)} : Cell{});
        Cell moment{};
        for (const auto& e : report.moments.estimates) {
            if (e.k == n) moment = e.estimate;
        }
        row.push_back(moment);
        Cell q95{};
        for (const auto& p : report.slln.points) {
            if (p.n == n) q95 = p.q95;
        }
        row.push_back(q95);
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline std::vector<std::string> failed_conditions(const ConditionReport& report) {
    std::vector<std::string> failed;
    auto index_name = [](DensityIndex i) { return i == kPreChange ? std::string("g vs f_0") : "f_" + std::to_string(i) + " vs f_" + std::to_string(i + 1); };
    if (!report.verdicts.mlr) {
        failed.push_back("mlr (" + index_name(*report.mlr.first_failure) + ", worst violation " +
                         detail::fmt(report.mlr.worst) + ")");
    }
    if (!report.verdicts.stochastic_dominance) {
        failed.push_back("stochastic_dominance (" + index_name(*report.stochastic_dominance.first_failure) + ")");
    }
    if (!report.verdicts.information) failed.push_back("information (I = " + detail::fmt(report.information_number_I) + " is not > 0)");
    if (!report.verdicts.moments) failed.push_back("moments");
    if (!report.verdicts.slln) failed.push_back("slln (95th-percentile deviation not decreasing)");
    if (!report.verdicts.sum_dominance) {
        failed.push_back("sum_dominance (gap " + detail::fmt(report.sum_dominance.max_gap) + " > slack " +
                         detail::fmt(report.sum_dominance.slack) + ")");
    }
    return failed;
}

inline CommandResult cmd_verify(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    const auto r = detail::resolve(cfg, opts);
    ConditionBudgets budgets = cfg.budgets;
    budgets.seed = r.seed;
    budgets.threads = opts.threads;
    const auto model = cfg.model();
    const ConditionReport report = full_condition_report(model, budgets);

    CommandResult result;
    result.files.push_back(r.dir / "report.json");
    write_file(result.files.back(), to_json(report).dump(2) + "\n");
    result.files.push_back(write_table(r.dir, "trace", condition_trace(report, budgets), "csv"));

    std::ostringstream summary;
    const auto failed = failed_conditions(report);
    summary << "verify: " << (report.pass() ? "PASS" : "FAIL") << " I=" << detail::fmt(report.information_number_I);
    if (report.closed_form_I) summary << " (closed form " << detail::fmt(*report.closed_form_I) << ")";
    for (const auto& f : failed) summary << "; failed " << f;
    for (const auto& w : report.warnings) summary << "; warning: " << w;
    result.summary = summary.str();
    result.exit_code = report.pass() ? 0 : 1;
    return result;
}

// ---------------------------------------------------------------------------
// arl / cadd / tradeoff

inline constexpr std::size_t kDefaultArlTrials = 2000;
inline constexpr std::size_t kDefaultCaddTrials = 10000;

/// (gamma, A) pairs requested by the config: `gammas`, else `gamma`, else `threshold`.
inline std::vector<std::pair<double, double>> requested_levels(const ExperimentConfig& cfg) {
    std::vector<std::pair<double, double>> levels;
    if (!cfg.gammas.empty()) {
        for (double g : cfg.gammas) levels.emplace_back(g, std::log(g));
    } else if (cfg.gamma) {
        levels.emplace_back(*cfg.gamma, std::log(*cfg.gamma));
    } else if (cfg.threshold) {
        levels.emplace_back(std::exp(*cfg.threshold), *cfg.threshold);
    } else {
        throw ConfigError("gamma", "one of gamma, gammas or threshold is required");
    }
    return levels;
}

inline Table arl_table(const std::vector<std::pair<double, ArlEstimate>>& rows) {
    Table table{{"gamma", "A", "trials", "mean_tau", "stderr", "censored_frac", "lcb95"}, {}};
    for (const auto& [gamma, a] : rows) {
        table.rows.push_back({gamma, a.threshold, std::uint64_t{a.trials}, a.mean_tau, a.standard_error,
                              a.censored_fraction, a.lcb95});
    }
    return table;
}

inline Table cadd_table(const std::vector<std::pair<double, CaddEstimate>>& rows) {
    Table table{{"gamma", "A", "nu", "trials", "accepted", "mean_delay", "stderr"}, {}};
    for (const auto& [gamma, c] : rows) {
        table.rows.push_back({gamma, c.threshold, c.nu, std::uint64_t{c.trials}, std::uint64_t{c.accepted},
                              c.mean_delay, c.standard_error});
    }
    return table;
}

inline CommandResult cmd_arl(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    const auto levels = requested_levels(cfg);
    const auto r = detail::resolve(cfg, opts);
    const auto model = cfg.model();
    const std::size_t trials = cfg.trials.value_or(kDefaultArlTrials);
    if (trials < 2) throw ConfigError("trials", "ARL estimation needs at least 2 trials");

    std::vector<std::pair<double, ArlEstimate>> rows;
    bool pass = true;
    std::ostringstream summary;
    summary << "arl:";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto [gamma, A] = levels[i];
        const std::uint64_t horizon = cfg.horizon.value_or(default_arl_horizon(A));
        const auto est = estimate_arl2fa(model, DetectorSetup{cfg.detector, A, cfg.window}, trials, horizon,
                                         trial_seed(r.seed, i), opts.threads);
        const bool ok = est.lcb95 >= gamma;
        pass = pass && ok;
        summary << " gamma=" << detail::fmt(gamma) << " mean=" << detail::fmt(est.mean_tau)
                << " lcb95=" << detail::fmt(est.lcb95) << (ok ? " PASS" : " FAIL");
        for (const auto& w : est.warnings) summary << " (warning: " << w << ")";
        rows.emplace_back(gamma, est);
    }
    CommandResult result;
    detail::emit(result, r, "arl", arl_table(rows));
    result.summary = summary.str();
    result.exit_code = pass ? 0 : 1;
    return result;
}

inline CommandResult cmd_cadd(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    const auto r = detail::resolve(cfg, opts);
    const auto model = cfg.model();
    const double A = cfg.threshold_or(kDemoThreshold);
    const double gamma = cfg.gamma.value_or(std::exp(A));
    std::vector<std::uint64_t> grid = cfg.nu_grid;
    if (grid.empty()) grid.push_back(cfg.nu && !cfg.nu->is_never() ? cfg.nu->time() : 1);
    if (cfg.horizon) {
        for (std::uint64_t nu : grid) {
            if (*cfg.horizon < nu) throw ConfigError("horizon", "must be >= every change point in nu_grid");
        }
    }
    const std::size_t trials = cfg.trials.value_or(kDefaultCaddTrials);
    const auto scan = worst_case_delay_scan(model, DetectorSetup{cfg.detector, A, cfg.window}, grid, trials,
                                            r.seed, cfg.horizon, opts.threads);
    std::vector<std::pair<double, CaddEstimate>> rows;
    bool pass = true;
    for (const auto& c : scan.cells) {
        rows.emplace_back(gamma, c);
        pass = pass && !c.flagged;
    }
    CommandResult result;
    detail::emit(result, r, "cadd", cadd_table(rows));
    std::ostringstream summary;
    summary << "cadd: A=" << detail::fmt(A);
    for (const auto& c : scan.cells) {
        summary << " nu=" << c.nu << ":" << (c.flagged ? "FLAGGED(no tau >= nu)" : detail::fmt(c.mean_delay));
    }
    if (scan.max_delay) summary << " max=" << detail::fmt(*scan.max_delay) << " at nu=" << *scan.argmax_nu;
    result.summary = summary.str();
    result.exit_code = pass ? 0 : 1;
    return result;
}

inline CommandResult cmd_tradeoff(const ExperimentConfig& cfg, const CommandOptions& opts = {}) {
    if (cfg.gammas.empty()) throw ConfigError("gammas", "required for tradeoff");
    const auto r = detail::resolve(cfg, opts);
    const auto model = cfg.model();
    TradeoffBudgets budgets;
    budgets.arl_trials = cfg.trials.value_or(kDefaultArlTrials);
    budgets.cadd_trials = cfg.cadd_trials.value_or(kDefaultCaddTrials);
    budgets.arl_horizon = cfg.horizon;
    budgets.threads = opts.threads;
    if (budgets.arl_trials < 2) throw ConfigError("trials", "ARL estimation needs at least 2 trials");
    const auto rows = tradeoff_curve(model, cfg.detector, cfg.gammas, r.seed, budgets, cfg.window);

    Table table{{"gamma", "A", "arl_lcb", "cadd", "bound"}, {}};
    std::vector<std::pair<double, ArlEstimate>> arl_rows;
    std::vector<std::pair<double, CaddEstimate>> cadd_rows;
    std::vector<double> As, delays, bounds;
    bool pass = true;
    for (const auto& row : rows) {
        table.rows.push_back({row.gamma, row.threshold_A, row.arl.lcb95, row.cadd.mean_delay, row.bound});
        arl_rows.emplace_back(row.gamma, row.arl);
        cadd_rows.emplace_back(row.gamma, row.cadd);
        As.push_back(row.threshold_A);
        delays.push_back(row.cadd.mean_delay);
        bounds.push_back(row.bound);
        pass = pass && row.arl.lcb95 >= row.gamma && !row.cadd.flagged;
    }
    CommandResult result;
    detail::emit(result, r, "tradeoff", table);
    detail::emit(result, r, "arl", arl_table(arl_rows));
    detail::emit(result, r, "cadd", cadd_table(cadd_rows));
    LineChart chart{"Detection delay vs threshold",
                    "A = log gamma",
                    "mean delay (nu = 1)",
                    {{"estimated CADD", As, delays, "#1f77b4", false, true},
                     {"log gamma / I", As, bounds, "#d62728", true, false}},
                    {},
                    {}};
    result.files.push_back(r.dir / "tradeoff.svg");
    write_file(result.files.back(), chart.render());

    std::ostringstream summary;
    summary << "tradeoff: " << (pass ? "PASS" : "FAIL");
    for (const auto& row : rows) {
        summary << " [gamma=" << detail::fmt(row.gamma) << " arl_lcb=" << detail::fmt(row.arl.lcb95)
                << " cadd=" << detail::fmt(row.cadd.mean_delay) << " bound=" << detail::fmt(row.bound) << "]";
    }
    if (rows.size() >= 2) summary << " slope=" << detail::fmt(least_squares_slope(As, delays));
    result.summary = summary.str();
    result.exit_code = pass ? 0 : 1;
    return result;
}

}  // namespace excusum::cli
