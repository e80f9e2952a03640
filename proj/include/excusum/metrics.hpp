#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "excusum/conditions.hpp"
#include "excusum/detectors.hpp"
#include "excusum/error.hpp"
#include "excusum/models.hpp"
#include "excusum/parallel.hpp"
#include "excusum/process.hpp"

namespace excusum {

/// One-sided 95% standard normal quantile.
inline constexpr double kZ95 = 1.6448536269514722;

struct TrialOutcome {
    enum class Kind { Detected, FalseAlarm, Censored };

    Kind kind = Kind::Censored;
    std::uint64_t tau = 0;  // stopping time, or the horizon when censored
    ChangePoint nu = ChangePoint::never();

    bool detected() const noexcept { return kind == Kind::Detected; }
    bool false_alarm() const noexcept { return kind == Kind::FalseAlarm; }
    bool censored() const noexcept { return kind == Kind::Censored; }

    /// tau - nu for a detection with tau >= nu.
    std::optional<std::uint64_t> delay() const {
        if (!detected()) return std::nullopt;
        return tau - nu.time();
    }
};

inline TrialOutcome classify(const StopResult& stop, ChangePoint nu) {
    TrialOutcome out;
    out.nu = nu;
    if (!stop.stopped) {
        out.kind = TrialOutcome::Kind::Censored;
        out.tau = stop.censored_at;
    } else {
        out.tau = stop.tau;
        out.kind = nu.before_change(stop.tau) ? TrialOutcome::Kind::FalseAlarm : TrialOutcome::Kind::Detected;
    }
    return out;
}

struct DetectorSetup {
    DetectorKind kind = DetectorKind::ExCusum;
    double threshold = 0.0;
    std::optional<std::size_t> window;
};

template <DensityFamily M>
TrialOutcome run_trial(const M& model, const DetectorSetup& detector, const ChangeSpec& spec) {
    PathStream<M> stream(model, spec);
    const StopResult stop = run_detector(detector.kind, model, [&] { return stream.next(); },
                                         detector.threshold, spec.horizon, detector.window);
    return classify(stop, spec.nu);
}

template <DensityFamily M>
std::vector<TrialOutcome> run_trials(const M& model, const DetectorSetup& detector, ChangePoint nu,
                                     std::uint64_t horizon, std::size_t trials, std::uint64_t seed,
                                     unsigned threads = 0) {
    std::vector<TrialOutcome> outcomes(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
        outcomes[t] = run_trial(model, detector, ChangeSpec{nu, horizon, trial_seed(seed, t)});
    });
    return outcomes;
}

// ---------------------------------------------------------------------------
// Mean time to false alarm

struct ArlEstimate {
    double threshold = 0.0;
    std::size_t trials = 0;
    std::uint64_t horizon = 0;
    double mean_tau = 0.0;
    double standard_error = 0.0;
    double censored_fraction = 0.0;
    double lcb95 = 0.0;  // mean - z_0.95 * se
    std::vector<std::string> warnings;
};

/// Horizon for false-alarm runs: 20 e^A, capped at 1e7 steps.
inline std::uint64_t default_arl_horizon(double threshold) {
    const double h = 20.0 * std::exp(threshold);
    if (!(h < 1e7)) return 10000000;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(h)));
}

/// Estimates E_inf[tau] from runs without a change. Censored runs count at
/// the horizon, so the estimate is biased low.
template <DensityFamily M>
ArlEstimate estimate_arl2fa(const M& model, const DetectorSetup& detector, std::size_t trials,
                            std::uint64_t horizon, std::uint64_t seed, unsigned threads = 0) {
    if (trials < 2) throw EstimationError("ARL estimation needs at least 2 trials");
    const auto outcomes = run_trials(model, detector, ChangePoint::never(), horizon, trials, seed, threads);
    ArlEstimate est;
    est.threshold = detector.threshold;
    est.trials = trials;
    est.horizon = horizon;
    if (static_cast<double>(horizon) < 10.0 * std::exp(detector.threshold)) {
        est.warnings.push_back("horizon is below 10 e^A; censoring may dominate the estimate");
    }
    if (trials < 100) est.warnings.push_back("fewer than 100 trials");
    double sum = 0.0, sum_sq = 0.0;
    std::size_t censored = 0;
    for (const auto& o : outcomes) {
        const double tau = static_cast<double>(o.tau);
        sum += tau;
        sum_sq += tau * tau;
        if (o.censored()) ++censored;
    }
    const double n = static_cast<double>(trials);
    est.mean_tau = sum / n;
    const double var = std::max(0.0, (sum_sq - n * est.mean_tau * est.mean_tau) / (n - 1.0));
    est.standard_error = std::sqrt(var / n);
    est.censored_fraction = static_cast<double>(censored) / n;
    est.lcb95 = est.mean_tau - kZ95 * est.standard_error;
    return est;
}

// ---------------------------------------------------------------------------
// Conditional average detection delay

struct CaddEstimate {
    std::uint64_t nu = 1;
    double threshold = 0.0;
    std::size_t trials = 0;
    std::uint64_t horizon = 0;
    std::size_t accepted = 0;  // runs with tau >= nu (censored runs included)
    std::size_t censored = 0;
    double acceptance_rate = 0.0;
    double mean_delay = 0.0;
    double standard_error = 0.0;
    bool flagged = false;  // no accepted runs; mean_delay is meaningless
};

/// nu + 10 ceil(A / I). Falls back to nu + 10^4 when I is not positive.
template <DensityFamily M>
std::uint64_t default_delay_horizon(const M& model, double threshold, std::uint64_t nu) {
    const double info = information_number(model);
    if (!(info > kMinInformation)) return nu + 10000;
    const double steps = std::ceil(std::max(threshold, 1.0) / info);
    return nu + 10 * static_cast<std::uint64_t>(std::min(steps, 1e6));
}

namespace detail {

template <DensityFamily M>
CaddEstimate cadd_cell(const M& model, const DetectorSetup& detector, std::uint64_t nu, std::size_t trials,
                       std::uint64_t seed, std::optional<std::uint64_t> horizon, unsigned threads) {
    if (nu < 1) throw std::invalid_argument("nu must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    CaddEstimate est;
    est.nu = nu;
    est.threshold = detector.threshold;
    est.trials = trials;
    est.horizon = horizon ? *horizon : default_delay_horizon(model, detector.threshold, nu);
    if (est.horizon < nu) throw std::invalid_argument("delay horizon must be >= nu");
    const auto outcomes = run_trials(model, detector, ChangePoint::at(nu), est.horizon, trials, seed, threads);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& o : outcomes) {
        if (o.false_alarm()) continue;
        const double delay = static_cast<double>(o.tau - nu);
        sum += delay;
        sum_sq += delay * delay;
        ++est.accepted;
        if (o.censored()) ++est.censored;
    }
    est.acceptance_rate = static_cast<double>(est.accepted) / static_cast<double>(trials);
    if (est.accepted == 0) {
        est.flagged = true;
        est.mean_delay = std::numeric_limits<double>::quiet_NaN();
        est.standard_error = std::numeric_limits<double>::quiet_NaN();
        return est;
    }
    const double n = static_cast<double>(est.accepted);
    est.mean_delay = sum / n;
    if (est.accepted > 1) {
        const double var = std::max(0.0, (sum_sq - n * est.mean_delay * est.mean_delay) / (n - 1.0));
        est.standard_error = std::sqrt(var / n);
    }
    return est;
}

}  // namespace detail

/// Estimates E_nu[tau - nu | tau >= nu]. Censored runs count at the horizon.
template <DensityFamily M>
CaddEstimate estimate_cadd(const M& model, const DetectorSetup& detector, std::uint64_t nu, std::size_t trials,
                           std::uint64_t seed, std::optional<std::uint64_t> horizon = std::nullopt,
                           unsigned threads = 0) {
    CaddEstimate est = detail::cadd_cell(model, detector, nu, trials, seed, horizon, threads);
    if (est.flagged) {
        std::ostringstream msg;
        msg << "no run satisfied tau >= nu at nu = " << nu << " (" << trials << " trials)";
        throw EstimationError(msg.str());
    }
    return est;
}

struct DelayScan {
    std::vector<CaddEstimate> cells;
    std::optional<double> max_delay;  // over unflagged cells
    std::optional<std::uint64_t> argmax_nu;
};

/// CADD over a finite grid of change points: a grid approximation to the
/// supremum over nu. Cells without accepted runs are kept and flagged.
template <DensityFamily M>
DelayScan worst_case_delay_scan(const M& model, const DetectorSetup& detector,
                                const std::vector<std::uint64_t>& nu_grid, std::size_t trials,
                                std::uint64_t seed, std::optional<std::uint64_t> horizon = std::nullopt,
                                unsigned threads = 0) {
    if (nu_grid.empty()) throw std::invalid_argument("nu grid is empty");
    DelayScan scan;
    for (std::uint64_t nu : nu_grid) {
        scan.cells.push_back(detail::cadd_cell(model, detector, nu, trials, seed, horizon, threads));
        const auto& cell = scan.cells.back();
        if (!cell.flagged && (!scan.max_delay || cell.mean_delay > *scan.max_delay)) {
            scan.max_delay = cell.mean_delay;
            scan.argmax_nu = nu;
        }
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Tradeoff between false alarms and delay

struct TradeoffRow {
    double gamma = 0.0;
    double threshold_A = 0.0;  // log(gamma)
    ArlEstimate arl;
    CaddEstimate cadd;  // change at nu = 1
    double bound = 0.0;  // log(gamma) / I
};

struct TradeoffBudgets {
    std::size_t arl_trials = 2000;
    std::size_t cadd_trials = 10000;
    std::optional<std::uint64_t> arl_horizon;  // default: 20 gamma capped at 1e7
    unsigned threads = 0;
};

template <DensityFamily M>
std::vector<TradeoffRow> tradeoff_curve(const M& model, DetectorKind kind, const std::vector<double>& gammas,
                                        std::uint64_t seed, const TradeoffBudgets& budgets = {},
                                        std::optional<std::size_t> window = std::nullopt) {
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        if (!(gammas[i] > 0.0)) throw std::invalid_argument("gamma must be positive");
        if (i > 0 && !(gammas[i] > gammas[i - 1])) throw std::invalid_argument("gammas must be increasing");
    }
    const double info = information_number(model);
    std::vector<TradeoffRow> rows;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        TradeoffRow row;
        row.gamma = gammas[i];
        row.threshold_A = std::log(gammas[i]);
        const DetectorSetup detector{kind, row.threshold_A, window};
        const std::uint64_t horizon =
            budgets.arl_horizon ? *budgets.arl_horizon : default_arl_horizon(row.threshold_A);
        row.arl = estimate_arl2fa(model, detector, budgets.arl_trials, horizon, trial_seed(seed, 2 * i),
                                  budgets.threads);
        row.cadd = detail::cadd_cell(model, detector, 1, budgets.cadd_trials, trial_seed(seed, 2 * i + 1),
                                     std::nullopt, budgets.threads);
        row.bound = row.threshold_A / info;
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Ordinary least-squares slope of y on x.
inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("x values are all equal");
    return sxy / sxx;
}

}  // namespace excusum
