#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>

#include "excusum/error.hpp"

namespace excusum::quadrature {

/// Successive trapezoid refinements must agree to this (absolute, scaled by
/// max(1, L1 norm)) before a result is accepted.
inline constexpr double kTolerance = 1e-10;

/// Adaptive trapezoid on a finite interval. Intended for integrands that decay
/// to (numerically) zero at both ends, where the rule converges geometrically.
template <class F>
double trapezoid(F&& f, double lo, double hi, double tolerance = kTolerance) {
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::trapezoidal(
        f, lo, hi, tolerance * 1e-2, std::size_t{22}, &error, &l1);
    if (!std::isfinite(value) || error > tolerance * std::max(1.0, l1)) {
        std::ostringstream msg;
        msg << "trapezoid quadrature on [" << lo << ", " << hi << "] did not converge (residual "
            << error << ")";
        throw NumericError(msg.str(), error);
    }
    return value;
}

/// Adaptive Gauss-Kronrod (7/15) for pieces whose endpoints are not in the tails.
template <class F>
double kronrod(F&& f, double lo, double hi, double tolerance = kTolerance) {
    if (lo == hi) return 0.0;
    using rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    double error = 0.0;
    double l1 = 0.0;
    // One 15-point pass first; most grid pieces are short and end here. The
    // acceptance test is absolute, so refinement asks for the relative
    // accuracy that meets it rather than a fixed relative target, which would
    // force full subdivision where the integrand is ~1e-30.
    double value = rule::integrate(f, lo, hi, 0, 0.0, &error, &l1);
    const double target = 1e-2 * tolerance * std::max(1.0, l1);
    if (!(error <= target)) {
        const double relative = std::clamp(target / std::max(l1, 1e-300), 1e-13, 1.0);
        value = rule::integrate(f, lo, hi, 15, relative, &error, &l1);
    }
    if (!std::isfinite(value) || error > tolerance * std::max(1.0, l1)) {
        std::ostringstream msg;
        msg << "Gauss-Kronrod quadrature on [" << lo << ", " << hi << "] did not converge (residual "
            << error << ")";
        throw NumericError(msg.str(), error);
    }
    return value;
}

}  // namespace excusum::quadrature
