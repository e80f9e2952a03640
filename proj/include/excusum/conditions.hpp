#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "excusum/models.hpp"
#include "excusum/parallel.hpp"
#include "excusum/rng.hpp"

namespace excusum {

// ---------------------------------------------------------------------------
// Cesaro average of KL divergences

struct CesaroTrace {
    std::vector<double> averages;  // averages[n - 1] = (1/n) sum_{k=1..n} D(f_{k-1} || g)
    double estimate = 0.0;         // averages.back(); the estimate of I

    double at(std::size_t n) const { return averages.at(n - 1); }
};

template <DensityFamily M>
KlMethod preferred_kl_method(const M& model) {
    return model.kl_closed(0) ? KlMethod::Closed : KlMethod::Quadrature;
}

template <DensityFamily M>
CesaroTrace cesaro_kl_average(const M& model, std::size_t n_max) {
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    const KlMethod method = preferred_kl_method(model);
    CesaroTrace trace;
    trace.averages.reserve(n_max);
    double sum = 0.0;
    for (std::size_t k = 1; k <= n_max; ++k) {
        sum += kl_divergence(model, k - 1, method);
        trace.averages.push_back(sum / static_cast<double>(k));
    }
    trace.estimate = trace.averages.back();
    return trace;
}

/// I for delay bounds: the closed-form limit when the model has one, else the
/// Cesaro average at n_max.
template <DensityFamily M>
double information_number(const M& model, std::size_t n_max = 100000) {
    if (auto limit = model.kl_limit()) return *limit;
    return cesaro_kl_average(model, n_max).estimate;
}

// ---------------------------------------------------------------------------
// Centred fourth moments of the LLR

struct MomentEstimate {
    std::size_t k = 0;  // X_k ~ f_{k-1}
    double centre = 0.0;  // D(f_{k-1} || g)
    double estimate = 0.0;
    double standard_error = 0.0;
    std::optional<double> closed_form;
    bool within_bound = true;
};

struct MomentCheck {
    std::vector<MomentEstimate> estimates;
    double bound = 0.0;
    bool bound_from_model = false;  // false: bound is the largest estimate
    bool pass = true;
};

/// Monte Carlo estimate of E[(llr(k-1, X) - D(f_{k-1}||g))^4] with X ~ f_{k-1}
/// for each k. Passes iff every estimate <= C + 3 standard errors, where C is
/// `bound` if given, else the model's closed-form bound.
template <DensityFamily M>
MomentCheck fourth_moment_check(const M& model, const std::vector<std::size_t>& ks,
                                std::size_t trials, std::uint64_t seed,
                                std::optional<double> bound = std::nullopt, unsigned threads = 0) {
    if (trials < 2) throw std::invalid_argument("fourth_moment_check needs at least 2 trials");
    for (std::size_t k : ks) {
        if (k < 1) throw std::invalid_argument("moment index k must be >= 1");
    }
    const KlMethod method = preferred_kl_method(model);
    MomentCheck check;
    check.estimates.resize(ks.size());
    parallel_for(ks.size(), threads, [&](std::size_t j) {
        const std::size_t k = ks[j];
        MomentEstimate& e = check.estimates[j];
        e.k = k;
        e.centre = kl_divergence(model, k - 1, method);
        e.closed_form = model.central_fourth_moment(k - 1);
        Rng rng(trial_seed(seed, k));
        double mean = 0.0, m2 = 0.0;  // Welford
        for (std::size_t t = 1; t <= trials; ++t) {
            const double x = model.sample_post(k - 1, rng);
            const double d = model.llr(k - 1, x) - e.centre;
            const double v = d * d * d * d;
            const double delta = v - mean;
            mean += delta / static_cast<double>(t);
            m2 += delta * (v - mean);
        }
        e.estimate = mean;
        e.standard_error = std::sqrt(m2 / static_cast<double>(trials - 1) / static_cast<double>(trials));
    });
    if (bound) {
        check.bound = *bound;
        check.bound_from_model = true;
    } else if (auto c = model.fourth_moment_bound()) {
        check.bound = *c;
        check.bound_from_model = true;
    } else {
        for (const auto& e : check.estimates) check.bound = std::max(check.bound, e.estimate);
    }
    for (auto& e : check.estimates) {
        e.within_bound = e.estimate <= check.bound + 3.0 * e.standard_error;
        check.pass = check.pass && e.within_bound;
    }
    return check;
}

// ---------------------------------------------------------------------------
// Empirical strong law for (1/n) sum_{k=1..n} llr(k-1, X_k) under a change at 1

struct SllnPoint {
    std::size_t n = 0;
    double mean_average = 0.0;
    double variance_of_average = 0.0;
    double q50 = 0.0, q90 = 0.0, q95 = 0.0, q99 = 0.0;  // quantiles of |average - I|
};

struct SllnDecay {
    double reference_I = 0.0;
    std::size_t trials = 0;
    std::vector<SllnPoint> points;
    bool decreasing = false;  // q95 strictly decreasing along the grid
};

/// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Simulates `trials` paths with the change at time 1 up to the largest grid
/// value and records the running LLR average at every grid point (the same
/// path is followed through the grid). `reference_I` defaults to
/// information_number(model). Evidence that is consistent with almost-sure
/// convergence, not a proof of it.
template <DensityFamily M>
SllnDecay slln_decay(const M& model, std::vector<std::size_t> grid, std::size_t trials,
                     std::uint64_t seed, std::optional<double> reference_I = std::nullopt,
                     unsigned threads = 0) {
    if (grid.empty()) throw std::invalid_argument("slln grid is empty");
    if (trials < 2) throw std::invalid_argument("slln needs at least 2 trials");
    std::sort(grid.begin(), grid.end());
    if (grid.front() < 1) throw std::invalid_argument("slln grid values must be >= 1");
    const std::size_t n_max = grid.back();
    SllnDecay result;
    result.reference_I = reference_I ? *reference_I : information_number(model);
    result.trials = trials;

    std::vector<double> averages(grid.size() * trials);  // [grid index][trial]
    parallel_for(trials, threads, [&](std::size_t t) {
        Rng rng(trial_seed(seed, t));
        double sum = 0.0;
        std::size_t g = 0;
        for (std::size_t k = 1; k <= n_max; ++k) {
            sum += model.llr(k - 1, model.sample_post(k - 1, rng));
            while (g < grid.size() && grid[g] == k) {
                averages[g * trials + t] = sum / static_cast<double>(k);
                ++g;
            }
        }
    });

    for (std::size_t g = 0; g < grid.size(); ++g) {
        SllnPoint p;
        p.n = grid[g];
        std::vector<double> deviations(trials);
        double mean = 0.0;
        for (std::size_t t = 0; t < trials; ++t) mean += averages[g * trials + t];
        mean /= static_cast<double>(trials);
        double ss = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const double a = averages[g * trials + t];
            ss += (a - mean) * (a - mean);
            deviations[t] = std::abs(a - result.reference_I);
        }
        p.mean_average = mean;
        p.variance_of_average = ss / static_cast<double>(trials - 1);
        std::sort(deviations.begin(), deviations.end());
        p.q50 = sorted_quantile(deviations, 0.50);
        p.q90 = sorted_quantile(deviations, 0.90);
        p.q95 = sorted_quantile(deviations, 0.95);
        p.q99 = sorted_quantile(deviations, 0.99);
        result.points.push_back(p);
    }
    result.decreasing = result.points.size() >= 2;
    for (std::size_t g = 1; g < result.points.size(); ++g) {
        if (!(result.points[g].q95 < result.points[g - 1].q95)) result.decreasing = false;
    }
    return result;
}

template <DensityFamily M>
SllnPoint slln_empirical(const M& model, std::size_t n, std::size_t trials, std::uint64_t seed,
                         std::optional<double> reference_I = std::nullopt, unsigned threads = 0) {
    return slln_decay(model, {n}, trials, seed, reference_I, threads).points.front();
}

// ---------------------------------------------------------------------------
// Stochastic ordering of shifted LLR sums

struct SumDominanceResult {
    bool pass = true;
    double max_gap = 0.0;  // max_t F_large(t) - F_small(t)
    double slack = 0.0;
    std::size_t trials = 0;
    double mean_small = 0.0;
    double mean_large = 0.0;
};

/// DKW-style band for an empirical CDF from `trials` samples at confidence 1 - alpha.
inline double dkw_slack(std::size_t trials, double alpha = 0.01) {
    return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(trials)));
}

/// One-sided sup_t (F_b(t) - F_a(t)) of two empirical CDFs. Sorts its inputs.
inline double max_ecdf_excess(std::vector<double>& a, std::vector<double>& b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double gap = 0.0;
    while (i < a.size() || j < b.size()) {
        double t;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) t = a[i];
        else t = b[j];
        while (i < a.size() && a[i] <= t) ++i;
        while (j < b.size() && b[j] <= t) ++j;
        gap = std::max(gap, static_cast<double>(j) / nb - static_cast<double>(i) / na);
    }
    return gap;
}

/// For hypothesised change time k, the normalised LLR sum
///   (1/n) sum_{i=k..k+n} llr(i - k, X_i)
/// with X_i ~ f_{i - nu} (true change at nu <= k). Passes iff the empirical CDF
/// of the k_large sum lies below that of the k_small sum up to the DKW slack.
/// Both sums in a trial are driven by the same random stream.
template <DensityFamily M>
SumDominanceResult sum_dominance_check(const M& model, std::size_t k_small, std::size_t k_large,
                                       std::size_t n, std::size_t trials, std::uint64_t seed,
                                       std::size_t nu = 1, unsigned threads = 0) {
    if (nu < 1 || k_small < nu || k_large < nu) {
        throw std::invalid_argument("need 1 <= nu <= k_small, k_large");
    }
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    std::vector<double> small(trials), large(trials);
    auto block_sum = [&](std::size_t k, std::uint64_t s) {
        Rng rng(s);
        double sum = 0.0;
        for (std::size_t i = k; i <= k + n; ++i) {
            const double x = model.sample_post(i - nu, rng);
            sum += model.llr(i - k, x);
        }
        return sum / static_cast<double>(n);
    };
    parallel_for(trials, threads, [&](std::size_t t) {
        const std::uint64_t s = trial_seed(seed, t);
        small[t] = block_sum(k_small, s);
        large[t] = block_sum(k_large, s);
    });
    SumDominanceResult r;
    r.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        r.mean_small += small[t];
        r.mean_large += large[t];
    }
    r.mean_small /= static_cast<double>(trials);
    r.mean_large /= static_cast<double>(trials);
    r.max_gap = max_ecdf_excess(small, large);
    r.slack = dkw_slack(trials);
    r.pass = r.max_gap <= r.slack;
    return r;
}

// ---------------------------------------------------------------------------
// Combined report

struct ConditionBudgets {
    std::uint64_t seed = 1;
    std::size_t cesaro_n_max = 100000;
    std::ptrdiff_t mlr_max_index = 100;  // checks g vs f_0 and f_n vs f_{n+1} for n <= this
    std::size_t grid_points = 2001;
    std::vector<std::size_t> moment_ks{1, 10, 100, 1000};
    std::size_t moment_trials = 100000;
    std::vector<std::size_t> slln_grid{1000, 2000, 4000, 8000, 16000};
    std::size_t slln_trials = 1000;
    std::size_t dominance_k_small = 1;
    std::size_t dominance_k_large = 5;
    std::size_t dominance_n = 20;
    std::size_t dominance_trials = 100000;
    unsigned threads = 0;
};

struct OrderingSummary {
    bool pass = true;
    std::optional<DensityIndex> first_failure;  // -1 means g vs f_0
    double worst = 0.0;                         // worst violation / tail gap over indices
    std::size_t indices_checked = 0;
};

struct ConditionVerdicts {
    bool mlr = false;
    bool stochastic_dominance = false;
    bool information = false;  // I > 0
    bool moments = false;
    bool slln = false;
    bool sum_dominance = false;

    bool all() const noexcept {
        return mlr && stochastic_dominance && information && moments && slln && sum_dominance;
    }
};

struct ConditionReport {
    double information_number_I = 0.0;  // Cesaro average at cesaro_n_max
    std::optional<double> closed_form_I;
    CesaroTrace cesaro;
    OrderingSummary mlr;
    OrderingSummary stochastic_dominance;
    MomentCheck moments;
    SllnDecay slln;
    SumDominanceResult sum_dominance;
    ConditionVerdicts verdicts;
    std::vector<std::string> warnings;

    bool pass() const noexcept { return verdicts.all(); }
};

inline constexpr double kMinInformation = 1e-12;

template <DensityFamily M>
ConditionReport full_condition_report(const M& model, const ConditionBudgets& budgets = {}) {
    ConditionReport report;

    for (DensityIndex index = kPreChange; index <= budgets.mlr_max_index; ++index) {
        const auto grid = default_grid(model, index, budgets.grid_points);
        const MlrCheck mlr = verify_mlr(model, index, grid);
        ++report.mlr.indices_checked;
        report.mlr.worst = std::max(report.mlr.worst, mlr.worst_violation);
        if (!mlr.monotone && report.mlr.pass) {
            report.mlr.pass = false;
            report.mlr.first_failure = index;
        }
        const DominanceCheck dom = verify_stochastic_dominance(model, index, grid);
        ++report.stochastic_dominance.indices_checked;
        report.stochastic_dominance.worst = std::max(report.stochastic_dominance.worst, dom.worst_gap);
        if (!dom.dominated && report.stochastic_dominance.pass) {
            report.stochastic_dominance.pass = false;
            report.stochastic_dominance.first_failure = index;
        }
    }
    if (kl_divergence(model, 0, preferred_kl_method(model)) < kMinInformation) {
        report.warnings.push_back("pre-change density coincides with f_0 (g = f_0)");
    }

    report.cesaro = cesaro_kl_average(model, budgets.cesaro_n_max);
    report.information_number_I = report.cesaro.estimate;
    report.closed_form_I = model.kl_limit();

    report.moments = fourth_moment_check(model, budgets.moment_ks, budgets.moment_trials,
                                         trial_seed(budgets.seed, 1), std::nullopt, budgets.threads);
    report.slln = slln_decay(model, budgets.slln_grid, budgets.slln_trials, trial_seed(budgets.seed, 2),
                             report.closed_form_I ? report.closed_form_I : report.information_number_I,
                             budgets.threads);
    report.sum_dominance = sum_dominance_check(model, budgets.dominance_k_small, budgets.dominance_k_large,
                                               budgets.dominance_n, budgets.dominance_trials,
                                               trial_seed(budgets.seed, 3), 1, budgets.threads);

    report.verdicts.mlr = report.mlr.pass;
    report.verdicts.stochastic_dominance = report.stochastic_dominance.pass;
    report.verdicts.information = report.information_number_I > kMinInformation;
    report.verdicts.moments = report.moments.pass;
    report.verdicts.slln = report.slln.decreasing;
    report.verdicts.sum_dominance = report.sum_dominance.pass;
    if (report.verdicts.mlr && !report.verdicts.stochastic_dominance) {
        report.warnings.push_back("MLR held on the grid but tail dominance failed");
    }
    return report;
}

}  // namespace excusum
