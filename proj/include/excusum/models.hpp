#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "excusum/error.hpp"
#include "excusum/quadrature.hpp"
#include "excusum/rng.hpp"
#include "excusum/schedule.hpp"

namespace excusum {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    bool bounded() const noexcept { return std::isfinite(lo) && std::isfinite(hi); }
};

/// Index of a density in the family: kPreChange selects g, n >= 0 selects f_n.
using DensityIndex = std::ptrdiff_t;
inline constexpr DensityIndex kPreChange = -1;

/// A pre-change density g and an indexed post-change family {f_n}.
///
/// log_pre/log_post are log-densities, llr(n, x) = log f_n(x) - log g(x)
/// without argument checking (see excusum::llr for the checked form).
/// pre_range()/post_range(n) are finite intervals outside of which the density
/// carries negligible mass; quadrature integrates over them. The optional
/// members return std::nullopt when no closed form is known.
template <class M>
concept DensityFamily = requires(const M& m, std::size_t n, double x, Rng& rng) {
    { m.log_pre(x) } -> std::convertible_to<double>;
    { m.log_post(n, x) } -> std::convertible_to<double>;
    { m.llr(n, x) } -> std::convertible_to<double>;
    { m.sample_pre(rng) } -> std::convertible_to<double>;
    { m.sample_post(n, rng) } -> std::convertible_to<double>;
    { m.support() } -> std::convertible_to<Interval>;
    { m.pre_range() } -> std::convertible_to<Interval>;
    { m.post_range(n) } -> std::convertible_to<Interval>;
    { m.kl_closed(n) } -> std::same_as<std::optional<double>>;
    { m.kl_limit() } -> std::same_as<std::optional<double>>;
    { m.central_fourth_moment(n) } -> std::same_as<std::optional<double>>;
    { m.fourth_moment_bound() } -> std::same_as<std::optional<double>>;
};

/// Unit-variance Gaussian location family: g = N(0, 1), f_n = N(mu_n, 1).
class GaussianModel {
public:
    static constexpr double kLogSqrt2Pi = 0.91893853320467274178;
    static constexpr double kHalfWidth = 10.0;

    explicit GaussianModel(MeanSchedule schedule, std::size_t cached = std::size_t{1} << 16)
        : schedule_(std::move(schedule)) {
        means_.resize(cached);
        half_squares_.resize(cached);
        for (std::size_t n = 0; n < cached; ++n) {
            means_[n] = schedule_(n);
            half_squares_[n] = 0.5 * means_[n] * means_[n];
        }
        double peak = std::abs(schedule_.limit());
        if (schedule_.kind() == ScheduleKind::ExplicitTable) {
            for (double v : schedule_.table_values()) peak = std::max(peak, std::abs(v));
        }
        mu_sup_ = peak;
    }

    const MeanSchedule& schedule() const noexcept { return schedule_; }

    double mean(std::size_t n) const noexcept {
        return n < means_.size() ? means_[n] : schedule_(n);
    }

    double log_pre(double x) const noexcept { return -0.5 * x * x - kLogSqrt2Pi; }

    double log_post(std::size_t n, double x) const noexcept {
        const double d = x - mean(n);
        return -0.5 * d * d - kLogSqrt2Pi;
    }

    // mu_n (x - mu_n / 2)
    double llr(std::size_t n, double x) const noexcept {
        if (n < means_.size()) return means_[n] * x - half_squares_[n];
        const double mu = schedule_(n);
        return mu * (x - 0.5 * mu);
    }

    /// sums[p] += llr(oldest_age - p, x) for every p; returns the largest updated sum.
    double accumulate_llr(std::span<double> sums, std::size_t oldest_age, double x) const noexcept {
        double best = -std::numeric_limits<double>::infinity();
        if (oldest_age < means_.size()) {
            const double* mu = means_.data() + oldest_age;
            const double* half = half_squares_.data() + oldest_age;
            const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(sums.size());
            double* s = sums.data();
            for (std::ptrdiff_t p = 0; p < count; ++p) {
                s[p] += mu[-p] * x - half[-p];
                best = std::max(best, s[p]);
            }
            return best;
        }
        for (std::size_t p = 0; p < sums.size(); ++p) {
            sums[p] += llr(oldest_age - p, x);
            best = std::max(best, sums[p]);
        }
        return best;
    }

    double sample_pre(Rng& rng) const { return rng.standard_normal(); }
    double sample_post(std::size_t n, Rng& rng) const { return mean(n) + rng.standard_normal(); }

    Interval support() const noexcept { return {}; }
    Interval pre_range() const noexcept { return {-kHalfWidth, kHalfWidth}; }
    Interval post_range(std::size_t n) const noexcept {
        const double mu = mean(n);
        return {mu - kHalfWidth, mu + kHalfWidth};
    }

    std::optional<double> kl_closed(std::size_t n) const { return 0.5 * mean(n) * mean(n); }
    std::optional<double> kl_limit() const { return 0.5 * schedule_.limit() * schedule_.limit(); }

    // Under f_n the LLR is mu_n (X - mu_n) + D, so its centred fourth moment is 3 mu_n^4.
    std::optional<double> central_fourth_moment(std::size_t n) const {
        return 3.0 * std::pow(mean(n), 4);
    }
    std::optional<double> fourth_moment_bound() const { return 3.0 * std::pow(mu_sup_, 4); }

private:
    MeanSchedule schedule_;
    std::vector<double> means_;
    std::vector<double> half_squares_;
    double mu_sup_ = 0.0;
};

/// Type-erased density model assembled from plain functions. Immutable after
/// construction; the functions must be safe to call concurrently.
struct DensityModel {
    std::function<double(double)> pre_change_log_density;
    std::function<double(std::size_t, double)> post_change_log_density;
    std::function<double(Rng&)> sampler_pre;
    std::function<double(std::size_t, Rng&)> sampler_post;
    Interval support_interval;
    Interval pre_integration_range;
    std::function<Interval(std::size_t)> post_integration_range;
    std::function<double(std::size_t)> kl_closed_form;            // may be empty
    std::optional<double> kl_limit_value;
    std::function<double(std::size_t)> central_fourth_moment_form;  // may be empty
    std::optional<double> fourth_moment_bound_value;

    double log_pre(double x) const { return pre_change_log_density(x); }
    double log_post(std::size_t n, double x) const { return post_change_log_density(n, x); }
    double llr(std::size_t n, double x) const { return log_post(n, x) - log_pre(x); }
    double sample_pre(Rng& rng) const { return sampler_pre(rng); }
    double sample_post(std::size_t n, Rng& rng) const { return sampler_post(n, rng); }
    Interval support() const { return support_interval; }
    Interval pre_range() const { return pre_integration_range; }
    Interval post_range(std::size_t n) const { return post_integration_range(n); }
    std::optional<double> kl_closed(std::size_t n) const {
        if (!kl_closed_form) return std::nullopt;
        return kl_closed_form(n);
    }
    std::optional<double> kl_limit() const { return kl_limit_value; }
    std::optional<double> central_fourth_moment(std::size_t n) const {
        if (!central_fourth_moment_form) return std::nullopt;
        return central_fourth_moment_form(n);
    }
    std::optional<double> fourth_moment_bound() const { return fourth_moment_bound_value; }
};

/// Wraps any DensityFamily behind the type-erased interface.
template <DensityFamily M>
DensityModel erase(M model) {
    auto m = std::make_shared<const M>(std::move(model));
    DensityModel d;
    d.pre_change_log_density = [m](double x) { return m->log_pre(x); };
    d.post_change_log_density = [m](std::size_t n, double x) { return m->log_post(n, x); };
    d.sampler_pre = [m](Rng& rng) { return m->sample_pre(rng); };
    d.sampler_post = [m](std::size_t n, Rng& rng) { return m->sample_post(n, rng); };
    d.support_interval = m->support();
    d.pre_integration_range = m->pre_range();
    d.post_integration_range = [m](std::size_t n) { return m->post_range(n); };
    if (m->kl_closed(0)) d.kl_closed_form = [m](std::size_t n) { return *m->kl_closed(n); };
    d.kl_limit_value = m->kl_limit();
    if (m->central_fourth_moment(0)) {
        d.central_fourth_moment_form = [m](std::size_t n) { return *m->central_fourth_moment(n); };
    }
    d.fourth_moment_bound_value = m->fourth_moment_bound();
    return d;
}

static_assert(DensityFamily<GaussianModel>);
static_assert(DensityFamily<DensityModel>);

// ---------------------------------------------------------------------------
// Checked evaluation

template <DensityFamily M>
void check_observation(const M& model, double x) {
    if (!std::isfinite(x)) throw DomainError("observation is not finite");
    if (!model.support().contains(x)) {
        std::ostringstream msg;
        msg << "observation " << x << " is outside the model support";
        throw DomainError(msg.str());
    }
}

/// log f_n(x) - log g(x).
template <DensityFamily M>
double llr(const M& model, std::size_t n, double x) {
    check_observation(model, x);
    return model.llr(n, x);
}

template <DensityFamily M>
double log_density(const M& model, DensityIndex index, double x) {
    return index == kPreChange ? model.log_pre(x) : model.log_post(static_cast<std::size_t>(index), x);
}

template <DensityFamily M>
Interval integration_range(const M& model, DensityIndex index) {
    return index == kPreChange ? model.pre_range() : model.post_range(static_cast<std::size_t>(index));
}

template <DensityFamily M>
double sample_pre(const M& model, Rng& rng) {
    return model.sample_pre(rng);
}

template <DensityFamily M>
double sample_post(const M& model, std::size_t n, Rng& rng) {
    return model.sample_post(n, rng);
}

// ---------------------------------------------------------------------------
// KL divergence and normalisation

enum class KlMethod { Closed, Quadrature };

/// D(f_n || g).
template <DensityFamily M>
double kl_divergence(const M& model, std::size_t n, KlMethod method) {
    if (method == KlMethod::Closed) {
        auto value = model.kl_closed(n);
        if (!value) throw UnsupportedError("model has no closed-form KL divergence");
        return *value;
    }
    const Interval range = model.post_range(n);
    if (!range.bounded()) throw NumericError("post-change integration range is unbounded");
    auto integrand = [&](double x) {
        const double lp = model.log_post(n, x);
        if (lp == -std::numeric_limits<double>::infinity()) return 0.0;
        return std::exp(lp) * (lp - model.log_pre(x));
    };
    return std::max(0.0, quadrature::trapezoid(integrand, range.lo, range.hi));
}

/// Integral of the density over its integration range (should be 1).
template <DensityFamily M>
double density_mass(const M& model, DensityIndex index) {
    const Interval range = integration_range(model, index);
    return quadrature::trapezoid(
        [&](double x) { return std::exp(log_density(model, index, x)); }, range.lo, range.hi);
}

/// Integral of exp(llr(n, x)) g(x); equals 1 for a valid likelihood ratio.
template <DensityFamily M>
double likelihood_ratio_mass(const M& model, std::size_t n) {
    const Interval a = model.pre_range();
    const Interval b = model.post_range(n);
    return quadrature::trapezoid(
        [&](double x) { return std::exp(model.llr(n, x) + model.log_pre(x)); },
        std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

// ---------------------------------------------------------------------------
// MLR and stochastic-dominance verification

inline constexpr double kMlrTolerance = 1e-12;
inline constexpr double kTailTolerance = 1e-9;

struct MlrCheck {
    bool monotone = true;
    double worst_violation = 0.0;  // largest decrease of the log-ratio between neighbours
    std::optional<double> worst_at;
};

struct DominanceCheck {
    bool dominated = true;
    double worst_gap = 0.0;  // max over grid of tail_lower(x) - tail_upper(x)
    std::optional<double> worst_at;
};

inline void check_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        if (!(grid[j] < grid[j + 1])) throw std::invalid_argument("grid must be strictly increasing");
    }
}

/// Equispaced grid covering the central part of the two densities compared by
/// the MLR check at `index` (index and index + 1; kPreChange compares g and f_0).
template <DensityFamily M>
std::vector<double> default_grid(const M& model, DensityIndex index, std::size_t points = 2001) {
    const Interval a = integration_range(model, index);
    const Interval b = integration_range(model, index + 1);
    auto shrink = [](Interval r) {
        const double c = 0.5 * (r.lo + r.hi);
        const double h = 0.4 * (r.hi - r.lo);
        return Interval{c - h, c + h};
    };
    const Interval sa = shrink(a), sb = shrink(b);
    const double lo = std::min(sa.lo, sb.lo);
    const double hi = std::max(sa.hi, sb.hi);
    std::vector<double> grid(points);
    for (std::size_t j = 0; j < points; ++j) {
        grid[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
    }
    return grid;
}

/// Checks that the density ratio (index + 1) / index is nondecreasing along
/// the grid, in the log domain. A necessary-condition check only: nothing is
/// said about the ratio between or beyond grid points.
template <DensityFamily M>
MlrCheck verify_mlr(const M& model, DensityIndex index, const std::vector<double>& grid) {
    if (index < kPreChange) throw std::invalid_argument("density index must be >= -1");
    check_grid(grid);
    for (double x : grid) {
        if (!model.support().contains(x)) throw std::invalid_argument("grid point outside support");
    }
    MlrCheck result;
    auto log_ratio = [&](double x) {
        const double den = log_density(model, index, x);
        if (den == -std::numeric_limits<double>::infinity()) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return log_density(model, index + 1, x) - den;
    };
    auto record = [&](double magnitude, double at) {
        if (magnitude > result.worst_violation) {
            result.worst_violation = magnitude;
            result.worst_at = at;
        }
    };
    // A zero denominator density is reported as an infinite violation at that point.
    double previous = log_ratio(grid.front());
    if (std::isnan(previous)) record(std::numeric_limits<double>::infinity(), grid.front());
    for (std::size_t j = 1; j < grid.size(); ++j) {
        const double current = log_ratio(grid[j]);
        if (std::isnan(current)) {
            record(std::numeric_limits<double>::infinity(), grid[j]);
        } else if (!std::isnan(previous)) {
            record(previous - current, grid[j]);
        }
        previous = current;
    }
    result.monotone = result.worst_violation <= kMlrTolerance;
    return result;
}

/// Upper-tail probabilities P(X >= x) of the density at `index` for every grid point.
template <DensityFamily M>
std::vector<double> upper_tail(const M& model, DensityIndex index, const std::vector<double>& grid) {
    check_grid(grid);
    const Interval range = integration_range(model, index);
    if (!range.bounded()) throw NumericError("integration range is unbounded");
    auto pdf = [&](double x) { return std::exp(log_density(model, index, x)); };
    std::vector<double> tail(grid.size());
    double running = quadrature::kronrod(pdf, grid.back(), std::max(grid.back(), range.hi));
    tail.back() = running;
    for (std::size_t j = grid.size() - 1; j-- > 0;) {
        running += quadrature::kronrod(pdf, grid[j], grid[j + 1]);
        tail[j] = running;
    }
    return tail;
}

/// Checks the tail inequality P_index(X >= x) <= P_{index+1}(X >= x) on the grid.
template <DensityFamily M>
DominanceCheck verify_stochastic_dominance(const M& model, DensityIndex index,
                                           const std::vector<double>& grid) {
    if (index < kPreChange) throw std::invalid_argument("density index must be >= -1");
    const auto lower = upper_tail(model, index, grid);
    const auto upper = upper_tail(model, index + 1, grid);
    DominanceCheck result;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double gap = lower[j] - upper[j];
        if (gap > result.worst_gap) {
            result.worst_gap = gap;
            result.worst_at = grid[j];
        }
    }
    result.dominated = result.worst_gap <= kTailTolerance;
    return result;
}

}  // namespace excusum
