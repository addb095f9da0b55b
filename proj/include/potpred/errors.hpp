#pragma once

#include <stdexcept>
#include <string>

namespace potpred {

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { Domain, Numeric, Io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid input: out-of-range arguments, infeasible levels, degenerate samples.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class UnboundedQuantileError : public DomainError {
public:
    using DomainError::DomainError;
};

class BeyondEndpointError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Mean (or expected shortfall) of a law with shape >= 1.
class InfiniteMomentError : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateSampleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Regression design without full column rank.
class RankDeficientError : public DegenerateSampleError {
public:
    using DegenerateSampleError::DegenerateSampleError;
};

class RuleInapplicableError : public DomainError {
public:
    using DomainError::DomainError;
};

class InfeasibleLevelError : public DomainError {
public:
    using DomainError::DomainError;
};

class OutOfRegimeError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Numerical failure: quadrature, root finding, optimizers, samplers.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Optimizer gave up; carries the best iterate found so far.
class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, double best_gamma, double best_sigma)
        : NumericError(what), best_gamma_(best_gamma), best_sigma_(best_sigma) {}
    double best_gamma() const noexcept { return best_gamma_; }
    double best_sigma() const noexcept { return best_sigma_; }

private:
    double best_gamma_;
    double best_sigma_;
};

/// Volatility recursion collapsed towards zero.
class RecursionGuardError : public NumericError {
public:
    using NumericError::NumericError;
};

class SamplerFailure : public NumericError {
public:
    using NumericError::NumericError;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace potpred
