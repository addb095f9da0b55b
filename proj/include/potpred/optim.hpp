#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace potpred::optim {

/// Objective returning f(x); when grad is non-empty it must also be filled.
/// Returning +inf marks x as infeasible; the line search backs off from it.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BfgsOptions {
    int max_iterations = 500;
    double grad_tol = 1e-9;   ///< sup-norm of the gradient
    double min_step = 1e-14;  ///< relative step below which the line search gives up
};

struct BfgsResult {
    std::vector<double> x;
    double value = 0.0;
    std::vector<double> grad;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

/// Quasi-Newton minimization with backtracking Armijo line search.
BfgsResult minimize_bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& opts = {});

/// Wraps a value-only function with central-difference gradients (relative step h).
Objective with_numeric_gradient(std::function<double(std::span<const double>)> f, double h = 1e-6);

}  // namespace potpred::optim
