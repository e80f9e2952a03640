#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "excusum/detectors.hpp"

using namespace excusum;

namespace {

std::vector<double> draw(const GaussianModel& model, ChangePoint nu, std::uint64_t horizon, std::uint64_t seed) {
    return generate_path(model, {nu, horizon, seed}).samples;
}

// log sum_k exp(sum_{i=k..n} llr(i-k, X_i)) by the literal double loop.
double log_sr_brute(std::span<const double> xs, const GaussianModel& model, std::size_t n) {
    std::vector<double> logs;
    for (std::size_t k = 1; k <= n; ++k) {
        double s = 0.0;
        for (std::size_t i = k; i <= n; ++i) s += model.llr(i - k, xs[i - 1]);
        logs.push_back(s);
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    double total = 0.0;
    for (double v : logs) total += std::exp(v - peak);
    return peak + std::log(total);
}

}  // namespace

TEST(ExCusum, WorkedTwoStepExample) {
    // mu_0 = 0.5, mu_1 = 0.75; llr(n, x) = mu_n (x - mu_n / 2).
    const GaussianModel model(MeanSchedule::table({0.5, 0.75}));
    ExCusum<GaussianModel> det(model);
    EXPECT_DOUBLE_EQ(det.update(1.0), 0.375);
    // k = 1: 0.375 + 0.75 * (1.5 - 0.375) = 1.21875; k = 2: 0.5 * (1.5 - 0.25) = 0.625.
    EXPECT_DOUBLE_EQ(det.update(1.5), 1.21875);
    EXPECT_EQ(det.argmax_candidate(), 1u);
    EXPECT_EQ(det.candidate_count(), 2u);
}

TEST(ExCusum, WorkedExampleTwoOneFive) {
    const GaussianModel model(MeanSchedule::table({0.5, 0.75}));
    const std::vector<double> xs{1.0, 2.0};
    // k = 1: 0.375 + 0.75 * (2 - 0.375) = 1.59375; k = 2: 0.5 * 1.75 = 0.875.
    EXPECT_DOUBLE_EQ(statistic_trace(DetectorKind::ExCusum, model, xs).back(), 1.59375);
    EXPECT_DOUBLE_EQ(ex_cusum_brute<GaussianModel>(xs, model, 2), 1.59375);
}

TEST(ExCusum, ZeroScheduleIsIdenticallyZero) {
    const GaussianModel model(MeanSchedule::constant(0.0));
    const auto xs = draw(model, ChangePoint::never(), 100, 4);
    for (double w : statistic_trace(DetectorKind::ExCusum, model, xs)) ASSERT_EQ(w, 0.0);
    EXPECT_EQ(run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs), 0.0).stopped, false);
}

TEST(ExCusum, RecursionMatchesBruteForce) {
    const MeanSchedule schedules[] = {MeanSchedule::arctangent(), MeanSchedule::table({0.0, 0.2, 1.0, 0.4}),
                                      MeanSchedule::geometric_approach(1.5, 0.7)};
    for (const auto& s : schedules) {
        const GaussianModel model(s);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto xs = draw(model, ChangePoint::at(1 + seed * 20), 200, seed);
            const auto trace = statistic_trace(DetectorKind::ExCusum, model, xs);
            for (std::size_t n = 1; n <= xs.size(); ++n) {
                const double oracle = ex_cusum_brute<GaussianModel>(xs, model, n);
                ASSERT_NEAR(trace[n - 1], oracle, 1e-9 * std::max(1.0, std::abs(oracle))) << n;
            }
        }
    }
}

TEST(ExCusum, ConstantScheduleReducesToCusum) {
    const GaussianModel model(MeanSchedule::constant(0.8));
    const auto xs = draw(model, ChangePoint::at(150), 400, 12);
    const auto w = statistic_trace(DetectorKind::ExCusum, model, xs);
    const auto c = statistic_trace(DetectorKind::Cusum, model, xs);
    for (std::size_t n = 0; n < xs.size(); ++n) ASSERT_NEAR(w[n], c[n], 1e-12) << n;
}

TEST(ExCusum, CandidateSumsAreExposed) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(3), 6, 1);
    ExCusum<GaussianModel> det(model);
    for (double x : xs) det.update(x);
    const auto sums = det.candidate_sums();
    ASSERT_EQ(sums.size(), 6u);
    EXPECT_EQ(det.first_candidate(), 1u);
    for (std::size_t k = 1; k <= 6; ++k) {
        double s = 0.0;
        for (std::size_t i = k; i <= 6; ++i) s += model.llr(i - k, xs[i - 1]);
        EXPECT_NEAR(sums[k - 1], s, 1e-12);
    }
    EXPECT_EQ(det.statistic(), *std::max_element(sums.begin(), sums.end()));
}

TEST(ExCusum, WindowKeepsTheNewestCandidates) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(50), 3000, 8);
    ExCusum<GaussianModel> windowed(model, 25);
    for (std::size_t n = 1; n <= xs.size(); ++n) {
        windowed.update(xs[n - 1]);
        ASSERT_EQ(windowed.candidate_count(), std::min<std::size_t>(n, 25));
        ASSERT_EQ(windowed.first_candidate(), n > 25 ? n - 24 : 1);
        // Oracle: the max over k in [n - M + 1, n].
        if (n % 97 == 0) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = n > 25 ? n - 24 : 1; k <= n; ++k) {
                double s = 0.0;
                for (std::size_t i = k; i <= n; ++i) s += model.llr(i - k, xs[i - 1]);
                best = std::max(best, s);
            }
            ASSERT_NEAR(windowed.statistic(), best, 1e-9);
        }
    }
    EXPECT_THROW(ExCusum<GaussianModel>(model, 0), std::invalid_argument);
}

TEST(ExCusum, LargeWindowIsExact) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(60), 300, 2);
    EXPECT_EQ(statistic_trace(DetectorKind::ExCusum, model, xs, 1000),
              statistic_trace(DetectorKind::ExCusum, model, xs));
}

TEST(ShiryaevRoberts, ZeroScheduleCountsObservations) {
    const GaussianModel model(MeanSchedule::constant(0.0));
    const auto xs = draw(model, ChangePoint::never(), 500, 3);
    const auto trace = statistic_trace(DetectorKind::ShiryaevRoberts, model, xs);
    for (std::size_t n = 1; n <= xs.size(); ++n) ASSERT_NEAR(trace[n - 1], std::log(double(n)), 1e-12);
}

TEST(ShiryaevRoberts, MatchesBruteForceAndDominatesExCusum) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(40), 150, 21);
    const auto sr = statistic_trace(DetectorKind::ShiryaevRoberts, model, xs);
    const auto w = statistic_trace(DetectorKind::ExCusum, model, xs);
    for (std::size_t n = 1; n <= xs.size(); ++n) {
        ASSERT_NEAR(sr[n - 1], log_sr_brute(xs, model, n), 1e-9) << n;
        ASSERT_GE(sr[n - 1], w[n - 1]);
        ASSERT_LE(sr[n - 1], w[n - 1] + std::log(double(n)) + 1e-12);
    }
}

TEST(ShiryaevRoberts, StaysFiniteOnLongPaths) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(10), 3000, 6);
    for (double v : statistic_trace(DetectorKind::ShiryaevRoberts, model, xs)) ASSERT_TRUE(std::isfinite(v));
}

TEST(Cusum, RecursionByHand) {
    const GaussianModel model(MeanSchedule::constant(1.0));
    Cusum<GaussianModel> det(model);
    EXPECT_DOUBLE_EQ(det.update(0.0), -0.5);
    EXPECT_DOUBLE_EQ(det.update(2.0), 1.5);
    EXPECT_DOUBLE_EQ(det.update(-1.0), 0.0);
    EXPECT_TRUE(Cusum<GaussianModel>::crossed(1.0, 1.0));
    EXPECT_FALSE(ExCusum<GaussianModel>::crossed(1.0, 1.0));
    EXPECT_FALSE(ShiryaevRoberts<GaussianModel>::crossed(1.0, 1.0));
}

TEST(Stopping, HigherThresholdsNeverStopEarlier) {
    const GaussianModel model(MeanSchedule::arctangent());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto xs = draw(model, ChangePoint::at(30), 400, seed);
        std::uint64_t previous = 0;
        for (double a : {1.0, 2.0, 4.0, 8.0}) {
            const auto r = run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs), a);
            ASSERT_TRUE(r.stopped);
            ASSERT_GE(r.tau, previous);
            previous = r.tau;
        }
    }
}

TEST(Stopping, ExtremeThresholds) {
    const GaussianModel model(MeanSchedule::arctangent());
    const auto xs = draw(model, ChangePoint::at(30), 100, 1);
    const auto low = run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs), -1.0);
    // W_1 = llr(0, X_1) = 0 under the arctangent schedule, which exceeds -1.
    EXPECT_TRUE(low.stopped);
    EXPECT_EQ(low.tau, 1u);
    const auto never = run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs),
                                    std::numeric_limits<double>::infinity());
    EXPECT_FALSE(never.stopped);
    EXPECT_EQ(never.censored_at, 100u);
    EXPECT_THROW(run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs),
                              std::numeric_limits<double>::quiet_NaN()),
                 std::invalid_argument);
}

TEST(Stopping, RejectsNonFiniteObservations) {
    const GaussianModel model(MeanSchedule::arctangent());
    std::vector<double> xs{0.1, std::numeric_limits<double>::quiet_NaN()};
    EXPECT_THROW(run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs), 100.0), DomainError);
    EXPECT_THROW(run_detector(DetectorKind::Cusum, model, std::span<const double>(xs), 100.0), DomainError);
}

TEST(Stopping, DetectsTheDemoChangePromptly) {
    const GaussianModel model(MeanSchedule::arctangent());
    std::vector<std::uint64_t> delays;
    for (std::uint64_t seed = 0; seed < 201; ++seed) {
        const auto xs = draw(model, ChangePoint::at(80), 400, 1000 + seed);
        const auto r = run_detector(DetectorKind::ExCusum, model, std::span<const double>(xs), std::log(1000.0));
        ASSERT_TRUE(r.stopped);
        if (r.tau >= 80) delays.push_back(r.tau - 80);
    }
    std::nth_element(delays.begin(), delays.begin() + delays.size() / 2, delays.end());
    EXPECT_LE(delays[delays.size() / 2], 20u);
}

TEST(DetectorKind, NamesRoundTrip) {
    for (auto k : {DetectorKind::ExCusum, DetectorKind::ShiryaevRoberts, DetectorKind::Cusum}) {
        EXPECT_EQ(parse_detector_kind(to_string(k)), k);
    }
    EXPECT_FALSE(parse_detector_kind("page").has_value());
}

TEST(ShiryaevRoberts, MeanGrowsLinearlyWithoutChange) {
    // E_inf[R_n] = n. A small constant mean keeps the variance of R_n moderate.
    const GaussianModel model(MeanSchedule::constant(0.3));
    const std::size_t trials = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        PathStream<GaussianModel> stream(model, {ChangePoint::never(), 50, trial_seed(9, t)});
        ShiryaevRoberts<GaussianModel> sr(model);
        double r = 0.0;
        for (int n = 0; n < 50; ++n) r = std::exp(sr.update(stream.next()));
        sum += r;
        sum_sq += r * r;
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sum_sq / trials - mean * mean) / trials);
    EXPECT_NEAR(mean, 50.0, 3.0 * se);
}
