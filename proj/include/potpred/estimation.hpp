#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "potpred/gp.hpp"

namespace potpred {

/// Ascending sample X_{1,n} <= ... <= X_{n,n}. Values must be finite.
class SortedSample {
public:
    explicit SortedSample(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
};

/**
 * @brief Top order statistics above the intermediate threshold X_{n-k,n}.
 *
 * k is the requested effective sample size and fixes tau_i = 1 - k/n.
 * Excesses equal to zero (ties with the threshold) are dropped and counted
 * in dropped_ties, so excesses.size() == k - dropped_ties.
 */
struct ExceedanceSet {
    std::size_t n = 0;
    std::size_t k = 0;
    double threshold = 0.0;
    double tau_i = 0.0;
    std::vector<double> excesses;  // ascending, strictly positive
    std::size_t dropped_ties = 0;

    std::size_t size() const noexcept { return excesses.size(); }

    /// Wraps excesses observed directly (e.g. simulated GP data) above a known threshold.
    static ExceedanceSet from_excesses(std::vector<double> excesses, double threshold, std::size_t n);
};

ExceedanceSet select_exceedances(const SortedSample& s, std::size_t k);

enum class Method { ML, PWM, Bayes };

const char* method_name(Method m) noexcept;
Method parse_method(const std::string& name);

struct GpFit {
    GpParams params{0.0, 1.0};
    Method method = Method::ML;
    std::size_t k = 0;
    double threshold = 0.0;
    bool converged = false;
    double loglik = 0.0;          // ML only
    double grad_norm = 0.0;       // ML only, gradient of the mean log-likelihood
    int iterations = 0;           // ML only
    bool at_boundary = false;     // ML: shape estimate pinned at -1/2
    bool pwm_regime_ok = true;    // PWM: gamma-hat < 1/2
};

/// Sum of GP log-densities of the excesses; -inf when any excess is outside the support.
double gp_loglik(const GpParams& p, std::span<const double> excesses) noexcept;

GpFit fit_ml(const ExceedanceSet& e);
GpFit fit_pwm(const ExceedanceSet& e);

/// Hill estimate from the k largest log-spacings above X_{n-k,n}.
double fit_hill(const SortedSample& s, std::size_t k);

/// threshold - sigma/gamma for gamma < 0, +inf otherwise.
double endpoint_estimate(const GpFit& fit, double threshold) noexcept;

/**
 * Observed information of the total log-likelihood in (gamma, log sigma),
 * row-major 2x2. Empty when the Hessian is not positive definite.
 */
std::optional<std::array<double, 4>> ml_observed_information(const ExceedanceSet& e, const GpParams& p);

struct StabilityPoint {
    std::size_t k = 0;
    std::optional<GpFit> fit;
    std::string error;
};

/// Shape estimates across a range of k, for choosing k by visual stability.
std::vector<StabilityPoint> gamma_stability_trace(const SortedSample& s, std::span<const std::size_t> ks,
                                                  Method method);

}  // namespace potpred
