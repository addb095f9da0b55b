#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "potpred/gp.hpp"

namespace potpred {

using Density = std::function<double(double)>;

struct QuadratureResult {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t pieces = 0;
};

/**
 * @brief Adaptive Gauss-Kronrod integral of f over [lower, upper] with an
 * absolute error target.
 *
 * An infinite upper limit is handled by the substitution x = lower + t/(1-t),
 * so every piece is integrated on a bounded interval. Optional breakpoints
 * (kinks, support endpoints) split the range; points outside it are ignored.
 * Throws NumericError when the error target cannot be met.
 */
QuadratureResult integrate(const Density& f, double lower, double upper, double abs_tol = 1e-10,
                           std::span<const double> breakpoints = {});

/// Hellinger distance sqrt(1/2 * int (sqrt f - sqrt g)^2) over the given support.
double hellinger(const Density& f, const Density& g, const Support& support,
                 std::span<const double> breakpoints = {});

}  // namespace potpred
