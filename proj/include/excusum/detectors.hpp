#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "excusum/error.hpp"
#include "excusum/models.hpp"
#include "excusum/process.hpp"

namespace excusum {

enum class DetectorKind { ExCusum, ShiryaevRoberts, Cusum };

inline std::string_view to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::ExCusum: return "ex-cusum";
        case DetectorKind::ShiryaevRoberts: return "sr";
        case DetectorKind::Cusum: return "cusum";
    }
    return "unknown";
}

inline std::optional<DetectorKind> parse_detector_kind(std::string_view name) {
    if (name == "ex-cusum") return DetectorKind::ExCusum;
    if (name == "sr") return DetectorKind::ShiryaevRoberts;
    if (name == "cusum") return DetectorKind::Cusum;
    return std::nullopt;
}

namespace detail {

// sums[p] += llr(oldest_age - p, x); returns the largest updated entry.
template <DensityFamily M>
double accumulate(const M& model, std::span<double> sums, std::size_t oldest_age, double x) {
    if constexpr (requires { model.accumulate_llr(sums, oldest_age, x); }) {
        return model.accumulate_llr(sums, oldest_age, x);
    } else {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < sums.size(); ++p) {
            sums[p] += model.llr(oldest_age - p, x);
            best = std::max(best, sums[p]);
        }
        return best;
    }
}

// Candidate sums for k = first_k, ..., n stored oldest first. Dropping old
// candidates advances an offset; the buffer is compacted lazily.
class CandidateBuffer {
public:
    std::span<double> active() noexcept { return {values_.data() + offset_, values_.size() - offset_}; }
    std::span<const double> active() const noexcept {
        return {values_.data() + offset_, values_.size() - offset_};
    }
    std::size_t size() const noexcept { return values_.size() - offset_; }
    std::uint64_t first_k() const noexcept { return first_k_; }

    void push(double value) { values_.push_back(value); }

    void drop_front(std::size_t count) {
        offset_ += count;
        first_k_ += count;
        if (offset_ > 1024 && offset_ * 2 > values_.size()) {
            values_.erase(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(offset_));
            offset_ = 0;
        }
    }

private:
    std::vector<double> values_;
    std::size_t offset_ = 0;
    std::uint64_t first_k_ = 1;
};

}  // namespace detail

/// Exploding CUSUM statistic
///
///   W_n = max_{1<=k<=n} sum_{i=k..n} log f_{i-k}(X_i) / g(X_i)
///
/// updated incrementally: each candidate change time k keeps its running sum,
/// every step adds the LLR at the candidate's current age n - k and appends a
/// new candidate k = n. Cost is linear in the number of retained candidates.
///
/// The optional window M keeps only candidates with n - k + 1 <= M. This is an
/// approximation with no optimality guarantee; without it W_n is exact.
template <DensityFamily M>
class ExCusum {
public:
    explicit ExCusum(const M& model, std::optional<std::size_t> window = std::nullopt)
        : model_(&model), window_(window) {
        if (window_ && *window_ == 0) throw std::invalid_argument("window must be >= 1");
    }

    double update(double x) {
        check_observation(*model_, x);
        ++n_;
        if (window_ && candidates_.size() >= *window_) {
            candidates_.drop_front(candidates_.size() + 1 - *window_);
        }
        double best = -std::numeric_limits<double>::infinity();
        if (candidates_.size() > 0) {
            best = detail::accumulate(*model_, candidates_.active(),
                                      static_cast<std::size_t>(n_ - candidates_.first_k()), x);
        }
        const double fresh = model_->llr(0, x);
        candidates_.push(fresh);
        statistic_ = std::max(best, fresh);
        return statistic_;
    }

    double statistic() const noexcept { return statistic_; }
    std::uint64_t time() const noexcept { return n_; }
    std::size_t candidate_count() const noexcept { return candidates_.size(); }
    std::optional<std::size_t> window() const noexcept { return window_; }

    /// Running sums S_k(n), oldest retained candidate first.
    std::span<const double> candidate_sums() const noexcept { return candidates_.active(); }
    std::uint64_t first_candidate() const noexcept { return candidates_.first_k(); }

    /// The candidate change time attaining W_n (latest on ties).
    std::uint64_t argmax_candidate() const {
        if (n_ == 0) throw std::logic_error("no observations yet");
        auto sums = candidates_.active();
        std::size_t best = 0;
        for (std::size_t p = 1; p < sums.size(); ++p) {
            if (sums[p] >= sums[best]) best = p;
        }
        return candidates_.first_k() + best;
    }

    static constexpr bool crossed(double statistic, double threshold) noexcept {
        return statistic > threshold;
    }

private:
    const M* model_;
    std::optional<std::size_t> window_;
    detail::CandidateBuffer candidates_;
    std::uint64_t n_ = 0;
    double statistic_ = -std::numeric_limits<double>::infinity();
};

/// Exploding Shiryaev-Roberts statistic
///
///   R_n = sum_{1<=k<=n} prod_{i=k..n} f_{i-k}(X_i) / g(X_i),
///
/// kept as log R_n via log-sum-exp over the per-candidate log products.
/// R_n - n is a martingale under the pre-change law.
template <DensityFamily M>
class ShiryaevRoberts {
public:
    explicit ShiryaevRoberts(const M& model) : model_(&model) {}

    /// Returns log R_n.
    double update(double x) {
        check_observation(*model_, x);
        ++n_;
        double peak = -std::numeric_limits<double>::infinity();
        if (!log_products_.empty()) {
            peak = detail::accumulate(*model_, std::span<double>(log_products_),
                                      static_cast<std::size_t>(n_ - 1), x);
        }
        const double fresh = model_->llr(0, x);
        log_products_.push_back(fresh);
        peak = std::max(peak, fresh);
        double total = 0.0;
        for (double v : log_products_) total += std::exp(v - peak);
        log_r_ = peak + std::log(total);
        return log_r_;
    }

    double statistic() const noexcept { return log_r_; }
    double log_r() const noexcept { return log_r_; }
    std::uint64_t time() const noexcept { return n_; }
    std::span<const double> log_candidate_products() const noexcept { return log_products_; }

    static constexpr bool crossed(double log_statistic, double threshold) noexcept {
        return log_statistic > threshold;
    }

private:
    const M* model_;
    std::vector<double> log_products_;
    std::uint64_t n_ = 0;
    double log_r_ = -std::numeric_limits<double>::infinity();
};

/// Classic CUSUM with the stationary post-change density f_0:
/// C_n = max(C_{n-1}, 0) + log f_0(X_n) / g(X_n), C_0 = 0.
template <DensityFamily M>
class Cusum {
public:
    explicit Cusum(const M& model) : model_(&model) {}

    double update(double x) {
        check_observation(*model_, x);
        ++n_;
        statistic_ = std::max(statistic_, 0.0) + model_->llr(0, x);
        return statistic_;
    }

    double statistic() const noexcept { return statistic_; }
    std::uint64_t time() const noexcept { return n_; }

    // The generalized CUSUM baseline stops on reaching the threshold.
    static constexpr bool crossed(double statistic, double threshold) noexcept {
        return statistic >= threshold;
    }

private:
    const M* model_;
    std::uint64_t n_ = 0;
    double statistic_ = 0.0;
};

/// W_n recomputed from scratch by the literal double loop over k and i.
/// O(n^2); the correctness oracle for ExCusum.
template <DensityFamily M>
double ex_cusum_brute(std::span<const double> samples, const M& model, std::size_t n) {
    if (n < 1 || n > samples.size()) throw std::invalid_argument("n must lie in [1, samples.size()]");
    for (std::size_t i = 0; i < n; ++i) check_observation(model, samples[i]);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n; ++k) {
        double sum = 0.0;
        for (std::size_t i = k; i <= n; ++i) sum += model.llr(i - k, samples[i - 1]);
        best = std::max(best, sum);
    }
    return best;
}

struct StopResult {
    bool stopped = false;
    std::uint64_t tau = 0;          // valid when stopped
    std::uint64_t censored_at = 0;  // horizon, valid when !stopped
    double final_statistic = 0.0;
};

/// Feeds observations from `next()` into the detector until the statistic
/// crosses `threshold` or `horizon` observations have been consumed.
template <class Detector, class Source>
StopResult run_until(Detector& detector, Source&& next, double threshold, std::uint64_t horizon) {
    if (std::isnan(threshold)) throw std::invalid_argument("threshold is NaN");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    StopResult result;
    for (std::uint64_t n = 1; n <= horizon; ++n) {
        const double x = next();
        const double stat = detector.update(x);
        if (std::isnan(stat)) {
            std::ostringstream msg;
            msg << "statistic became NaN at n = " << n << " (x = " << x << ")";
            throw NumericError(msg.str());
        }
        if (Detector::crossed(stat, threshold)) {
            result.stopped = true;
            result.tau = n;
            result.final_statistic = stat;
            return result;
        }
        result.final_statistic = stat;
    }
    result.censored_at = horizon;
    return result;
}

template <DensityFamily M, class Source>
StopResult run_detector(DetectorKind kind, const M& model, Source&& next, double threshold,
                        std::uint64_t horizon, std::optional<std::size_t> window = std::nullopt) {
    switch (kind) {
        case DetectorKind::ExCusum: {
            ExCusum<M> detector(model, window);
            return run_until(detector, next, threshold, horizon);
        }
        case DetectorKind::ShiryaevRoberts: {
            ShiryaevRoberts<M> detector(model);
            return run_until(detector, next, threshold, horizon);
        }
        case DetectorKind::Cusum: {
            Cusum<M> detector(model);
            return run_until(detector, next, threshold, horizon);
        }
    }
    throw std::invalid_argument("unknown detector kind");
}

/// Runs over a stored path; the horizon is capped at the path length.
template <DensityFamily M>
StopResult run_detector(DetectorKind kind, const M& model, std::span<const double> samples,
                        double threshold, std::optional<std::size_t> window = std::nullopt) {
    std::size_t i = 0;
    return run_detector(kind, model, [&] { return samples[i++]; }, threshold, samples.size(), window);
}

/// Statistic after every observation (log R_n for the SR detector).
template <DensityFamily M>
std::vector<double> statistic_trace(DetectorKind kind, const M& model, std::span<const double> samples,
                                    std::optional<std::size_t> window = std::nullopt) {
    std::vector<double> trace;
    trace.reserve(samples.size());
    auto run = [&](auto&& detector) {
        for (double x : samples) trace.push_back(detector.update(x));
    };
    switch (kind) {
        case DetectorKind::ExCusum: run(ExCusum<M>(model, window)); break;
        case DetectorKind::ShiryaevRoberts: run(ShiryaevRoberts<M>(model)); break;
        case DetectorKind::Cusum: run(Cusum<M>(model)); break;
    }
    return trace;
}

}  // namespace excusum
