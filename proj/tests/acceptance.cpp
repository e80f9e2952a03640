// Acceptance suite: one PASS/FAIL line per criterion.
//
//   excusum_acceptance [--only N] [--threads T]
//
// A criterion passes only when its check holds and it finishes inside its
// runtime limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "excusum/cli/commands.hpp"
#include "excusum/conditions.hpp"
#include "excusum/detectors.hpp"
#include "excusum/metrics.hpp"
#include "excusum/parallel.hpp"

using namespace excusum;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_seconds;
    std::function<Verdict(unsigned)> check;
};

std::string num(double v, int digits = 6) {
    std::ostringstream out;
    out << std::setprecision(digits) << v;
    return out.str();
}

const double kInfo = std::numbers::pi * std::numbers::pi / 8.0;

Verdict oracle_equivalence(unsigned threads) {
    const GaussianModel model(MeanSchedule::arctangent());
    const std::size_t paths = 100, length = 500;
    std::vector<double> worst(paths, 0.0);
    parallel_for(paths, threads, [&](std::size_t p) {
        // Change points spread over the path, every fifth path without a change.
        const ChangePoint nu = p % 5 == 4 ? ChangePoint::never() : ChangePoint::at(1 + (p * 37) % length);
        const auto xs = generate_path(model, {nu, length, trial_seed(101, p)}).samples;
        ExCusum<GaussianModel> det(model);
        for (std::size_t n = 1; n <= length; ++n) {
            const double w = det.update(xs[n - 1]);
            const double oracle = ex_cusum_brute<GaussianModel>(xs, model, n);
            worst[p] = std::max(worst[p], std::abs(w - oracle));
        }
    });
    const double max_err = *std::max_element(worst.begin(), worst.end());
    return {max_err <= 1e-9, "max |W_n - brute| = " + num(max_err, 3) + " over 100 paths, n <= 500"};
}

Verdict cusum_reduction(unsigned threads) {
    const GaussianModel model(MeanSchedule::constant(1.0));
    const std::size_t paths = 100, length = 1000;
    std::vector<double> worst(paths, 0.0);
    parallel_for(paths, threads, [&](std::size_t p) {
        const auto xs = generate_path(model, {ChangePoint::at(1 + p * 10), length, trial_seed(202, p)}).samples;
        ExCusum<GaussianModel> ex(model);
        Cusum<GaussianModel> cu(model);
        for (double x : xs) worst[p] = std::max(worst[p], std::abs(ex.update(x) - cu.update(x)));
    });
    const double max_err = *std::max_element(worst.begin(), worst.end());
    return {max_err <= 1e-12, "max |W_n - C_n| = " + num(max_err, 3) + " over 100 paths of length 1000"};
}

Verdict martingale(unsigned threads) {
    const GaussianModel model(MeanSchedule::arctangent());
    const std::size_t trials = 100000;
    const std::vector<std::size_t> checkpoints{10, 50};
    std::vector<double> r(trials * checkpoints.size());
    parallel_for(trials, threads, [&](std::size_t t) {
        PathStream<GaussianModel> stream(model, {ChangePoint::never(), checkpoints.back(), trial_seed(303, t)});
        ShiryaevRoberts<GaussianModel> sr(model);
        std::size_t c = 0;
        for (std::size_t n = 1; n <= checkpoints.back(); ++n) {
            const double log_r = sr.update(stream.next());
            if (n == checkpoints[c]) r[c++ * trials + t] = std::exp(log_r);
        }
    });
    Verdict v{true, ""};
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        double mean = 0.0, ss = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const double d = r[c * trials + t] - mean;
            mean += d / static_cast<double>(t + 1);
            ss += d * (r[c * trials + t] - mean);
        }
        const double se = std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
        const double n = static_cast<double>(checkpoints[c]);
        const bool ok = std::abs(mean - n) <= 3.0 * se;
        v.pass = v.pass && ok;
        v.detail += (c ? "; " : "") + std::string("n=") + num(n) + ": mean R_n = " + num(mean) + " (se " +
                    num(se, 3) + ")";
    }
    return v;
}

Verdict false_alarm_bound(unsigned threads) {
    const GaussianModel model(MeanSchedule::arctangent());
    Verdict v{true, ""};
    std::uint64_t seed = 404;
    for (double gamma : {100.0, 500.0}) {
        const double a = std::log(gamma);
        const auto est = estimate_arl2fa(model, {DetectorKind::ExCusum, a, {}}, 2000,
                                         static_cast<std::uint64_t>(20.0 * gamma), seed++, threads);
        const bool ok = est.lcb95 >= gamma;
        v.pass = v.pass && ok;
        v.detail += (gamma > 100.0 ? "; " : "") + std::string("gamma=") + num(gamma) + ": mean " +
                    num(est.mean_tau) + ", lcb95 " + num(est.lcb95) + ", censored " +
                    num(100.0 * est.censored_fraction, 3) + "%";
    }
    return v;
}

Verdict kl_closed_form(unsigned) {
    double worst = 0.0;
    for (double mu : {0.1, 1.0, std::numbers::pi / 2.0}) {
        const GaussianModel model(MeanSchedule::constant(mu));
        const double quad = kl_divergence(model, 0, KlMethod::Quadrature);
        worst = std::max(worst, std::abs(quad - mu * mu / 2.0));
    }
    return {worst <= 1e-8, "max |quadrature - mu^2/2| = " + num(worst, 3)};
}

Verdict information_number_check(unsigned) {
    const MeanSchedule schedule = MeanSchedule::arctangent();
    const GaussianModel model(schedule);
    const std::size_t n = 100000;
    const double estimate = cesaro_kl_average(model, n).estimate;
    // Direct summation of atan(k-1)^2 / 2 without the model.
    long double sum = 0.0L;
    for (std::size_t k = 1; k <= n; ++k) {
        const long double m = std::atan(static_cast<long double>(k - 1));
        sum += m * m / 2.0L;
    }
    const double oracle = static_cast<double>(sum / static_cast<long double>(n));
    const bool ok = std::abs(estimate - kInfo) <= 5e-4 && std::abs(estimate - oracle) <= 1e-10;
    return {ok, "Cesaro average at n=1e5 = " + num(estimate, 9) + ", direct sum " + num(oracle, 9) +
                    ", pi^2/8 = " + num(kInfo, 9)};
}

Verdict fourth_moment(unsigned threads) {
    const GaussianModel arctan(MeanSchedule::arctangent());
    const auto check = fourth_moment_check(arctan, {1, 10, 100}, 100000, 505, std::nullopt, threads);
    const double bound = 3.0 * std::pow(std::numbers::pi / 2.0, 4);
    bool ok = std::abs(check.bound - bound) < 1e-12;
    std::string detail = "C = " + num(check.bound);
    for (const auto& e : check.estimates) {
        ok = ok && e.estimate <= bound + 3.0 * e.standard_error;
        detail += "; k=" + std::to_string(e.k) + ": " + num(e.estimate) + " (se " + num(e.standard_error, 3) + ")";
    }
    const GaussianModel unit(MeanSchedule::constant(1.0));
    const auto e = fourth_moment_check(unit, {1}, 100000, 506, std::nullopt, threads).estimates.front();
    const bool unit_ok = std::abs(e.estimate - 3.0) <= 3.0 * e.standard_error;
    detail += "; mu=1: " + num(e.estimate) + " (se " + num(e.standard_error, 3) + ")";
    return {ok && unit_ok, detail};
}

Verdict delay_slope(unsigned threads) {
    const GaussianModel model(MeanSchedule::arctangent());
    const std::vector<double> as{4.0, 6.0, 8.0};
    std::vector<double> delays;
    std::string detail;
    for (std::size_t i = 0; i < as.size(); ++i) {
        const auto est = estimate_cadd(model, {DetectorKind::ExCusum, as[i], {}}, 1, 10000, trial_seed(606, i),
                                       std::nullopt, threads);
        delays.push_back(est.mean_delay);
        detail += "A=" + num(as[i]) + ": " + num(est.mean_delay, 5) + "; ";
    }
    const double slope = least_squares_slope(as, delays);
    const double target = 1.0 / kInfo;
    const double rel = std::abs(slope - target) / target;
    return {rel <= 0.15, detail + "slope " + num(slope, 4) + " vs 1/I = " + num(target, 5) + " (" +
                             num(100.0 * rel, 3) + "% off, limit 15%)"};
}

Verdict shifted_sum_dominance(unsigned threads) {
    const GaussianModel arctan(MeanSchedule::arctangent());
    const auto good = sum_dominance_check(arctan, 1, 5, 20, 100000, 707, 1, threads);
    const GaussianModel decreasing(MeanSchedule::table({1.5, 1.0, 0.5}));
    const auto bad = sum_dominance_check(decreasing, 1, 5, 20, 100000, 707, 1, threads);
    return {good.pass && !bad.pass, "arctangent gap " + num(good.max_gap, 3) + " (slack " + num(good.slack, 3) +
                                        "); decreasing table gap " + num(bad.max_gap, 3)};
}

Verdict demo_reproduction(unsigned threads) {
    const GaussianModel model(MeanSchedule::arctangent());
    const std::size_t runs = 1000;
    const double a = cli::kDemoThreshold;
    std::vector<char> quiet(runs), detected(runs), early(runs);
    parallel_for(runs, threads, [&](std::size_t r) {
        const ChangeSpec spec{ChangePoint::at(cli::kDemoChangePoint), cli::kDemoHorizon, trial_seed(808, r)};
        const auto run = cli::demo_run(model, DetectorKind::ExCusum, a, spec);
        quiet[r] = run.max_pre_change < a;
        detected[r] = run.tau && *run.tau >= cli::kDemoChangePoint && *run.tau - cli::kDemoChangePoint <= 100;
        early[r] = run.tau && *run.tau >= cli::kDemoChangePoint && *run.tau <= 100;
    });
    auto rate = [&](const std::vector<char>& v) {
        return static_cast<double>(std::count(v.begin(), v.end(), 1)) / static_cast<double>(runs);
    };
    const double q = rate(quiet), d = rate(detected);
    return {q >= 0.95 && d >= 0.95, "pre-change max < log 1000 in " + num(100 * q, 4) +
                                         "% of runs; detected within 100 steps in " + num(100 * d, 4) +
                                         "% (tau <= 100 in " + num(100 * rate(early), 4) + "%)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    unsigned threads = 0;
    app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "incremental EX-CUSUM equals the brute-force statistic", 10, oracle_equivalence},
        {2, "constant schedule reduces EX-CUSUM to CUSUM", 5, cusum_reduction},
        {3, "SR statistic has mean n without a change", 120, martingale},
        {4, "false-alarm lower bound holds for gamma in {100, 500}", 300, false_alarm_bound},
        {5, "Gaussian KL quadrature matches mu^2/2", 1, kl_closed_form},
        {6, "arctangent information number is pi^2/8", 5, information_number_check},
        {7, "fourth moments stay below 3 (pi/2)^4", 60, fourth_moment},
        {8, "delay grows like A / I", 600, delay_slope},
        {9, "shifted LLR sums are stochastically ordered", 120, shifted_sum_dominance},
        {10, "demo path stays quiet before nu = 80 and detects after", 60, demo_reproduction},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check(threads);
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = v.pass && in_time;
        if (!pass) ++failures;
        std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " -- " << v.detail
                  << " [" << num(secs, 3) << " s, limit " << num(c.limit_seconds) << " s"
                  << (in_time ? "" : ", TOO SLOW") << "]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
