#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace excusum {

/// Observation outside the model support, or a non-finite input.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested an operation the model cannot provide (e.g. closed-form KL).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Quadrature non-convergence or a NaN statistic.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A Monte Carlo estimator had nothing to average.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration. `path()` names the offending field, e.g. "model.schedule.kind".
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string path, const std::string& message)
        : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace excusum
