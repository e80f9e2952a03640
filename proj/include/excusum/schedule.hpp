#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace excusum {

enum class ScheduleKind { Constant, Arctangent, LinearSaturating, GeometricApproach, ExplicitTable };

inline std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::Arctangent: return "arctangent";
        case ScheduleKind::LinearSaturating: return "linear-saturating";
        case ScheduleKind::GeometricApproach: return "geometric-approach";
        case ScheduleKind::ExplicitTable: return "explicit-table";
    }
    return "unknown";
}

/// The post-change mean sequence mu_0, mu_1, ... of a Gaussian exploding family.
///
/// Built-in kinds (mu = limit):
///   constant            mu_n = mu
///   arctangent          mu_n = (2 mu / pi) atan(rate n)   (mu = pi/2, rate = 1 gives atan(n))
///   linear-saturating   mu_n = min(slope n, mu)
///   geometric-approach  mu_n = mu (1 - ratio^n)
///   explicit-table      mu_n = table[min(n, size - 1)]
///
/// Explicit tables are not required to be monotone so that the condition
/// checkers can be fed counterexamples; use is_nondecreasing() to test.
class MeanSchedule {
public:
    static MeanSchedule constant(double mu) {
        require(std::isfinite(mu) && mu >= 0.0, "constant schedule needs finite mu >= 0");
        return MeanSchedule(ScheduleKind::Constant, mu, {});
    }

    static MeanSchedule arctangent(double mu = std::numbers::pi / 2.0, double rate = 1.0) {
        require(std::isfinite(mu) && mu >= 0.0, "arctangent schedule needs finite mu >= 0");
        require(std::isfinite(rate) && rate > 0.0, "arctangent schedule needs rate > 0");
        return MeanSchedule(ScheduleKind::Arctangent, mu, {rate});
    }

    static MeanSchedule linear_saturating(double slope, double mu) {
        require(std::isfinite(mu) && mu >= 0.0, "linear-saturating schedule needs finite mu >= 0");
        require(std::isfinite(slope) && slope >= 0.0, "linear-saturating schedule needs slope >= 0");
        return MeanSchedule(ScheduleKind::LinearSaturating, mu, {slope});
    }

    static MeanSchedule geometric_approach(double mu, double ratio) {
        require(std::isfinite(mu) && mu >= 0.0, "geometric-approach schedule needs finite mu >= 0");
        require(std::isfinite(ratio) && ratio >= 0.0 && ratio < 1.0,
                "geometric-approach schedule needs ratio in [0, 1)");
        return MeanSchedule(ScheduleKind::GeometricApproach, mu, {ratio});
    }

    static MeanSchedule table(std::vector<double> values) {
        require(!values.empty(), "explicit-table schedule needs at least one value");
        for (double v : values) require(std::isfinite(v), "explicit-table values must be finite");
        const double last = values.back();
        MeanSchedule s(ScheduleKind::ExplicitTable, last, {});
        s.table_ = std::move(values);
        return s;
    }

    double operator()(std::size_t n) const noexcept {
        const double nd = static_cast<double>(n);
        switch (kind_) {
            case ScheduleKind::Constant: return limit_;
            case ScheduleKind::Arctangent:
                return (2.0 * limit_ / std::numbers::pi) * std::atan(params_[0] * nd);
            case ScheduleKind::LinearSaturating: return std::min(params_[0] * nd, limit_);
            case ScheduleKind::GeometricApproach:
                return limit_ * (1.0 - std::pow(params_[0], nd));
            case ScheduleKind::ExplicitTable:
                return table_[std::min(n, table_.size() - 1)];
        }
        return limit_;
    }

    ScheduleKind kind() const noexcept { return kind_; }
    double limit() const noexcept { return limit_; }
    const std::vector<double>& params() const noexcept { return params_; }
    const std::vector<double>& table_values() const noexcept { return table_; }

    /// mu_n <= mu_{n+1} for every n < count (for tables, over the whole table
    /// once count exceeds its length).
    bool is_nondecreasing(std::size_t count) const {
        for (std::size_t n = 0; n + 1 < count; ++n) {
            if ((*this)(n + 1) < (*this)(n)) return false;
        }
        return true;
    }

private:
    MeanSchedule(ScheduleKind kind, double limit, std::vector<double> params)
        : kind_(kind), limit_(limit), params_(std::move(params)) {}

    static void require(bool ok, const char* message) {
        if (!ok) throw std::invalid_argument(message);
    }

    ScheduleKind kind_;
    double limit_;
    std::vector<double> params_;
    std::vector<double> table_;
};

}  // namespace excusum
