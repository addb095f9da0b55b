#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "potpred/estimation.hpp"
#include "potpred/gp.hpp"

namespace potpred {

// Shape priors. All are restricted to (-1/2, upper).
struct TruncatedNormalShape {
    double mean = 0.0;
    double sd = 10.0;
    double upper = kInf;
};

struct UniformWindowShape {
    double lo = -0.5;
    double hi = 1.0;
};

struct CustomShape {
    std::function<double(double)> log_density;  // may be unnormalized
    double upper = kInf;
    std::string name = "custom";
};

using ShapePrior = std::variant<TruncatedNormalShape, UniformWindowShape, CustomShape>;

enum class ScaleBase { Gamma, InverseGamma };

/// pi(sigma) = base(sigma / anchor) / anchor, base with shape a and rate b.
struct DataDependentScale {
    ScaleBase base = ScaleBase::Gamma;
    double a = 1.0;
    double b = 1.0;
    double anchor = 1.0;
};

/// Improper pi(sigma) proportional to 1/sigma.
struct LogUniformScale {};

using ScalePrior = std::variant<DataDependentScale, LogUniformScale>;

/**
 * @brief Product prior pi_sh(gamma) * pi_sc(sigma).
 *
 * Construction validates the shape prior: it must be integrable on
 * (-1/2, 0) and bounded on (0, inf). Custom densities are checked
 * numerically; violations throw DomainError.
 */
class PriorSpec {
public:
    PriorSpec(ShapePrior shape, ScalePrior scale);

    /// Truncated normal(0, 10) shape and Gamma(1, 1) scale anchored at the PWM scale estimate.
    static PriorSpec default_for(const ExceedanceSet& e);

    const ShapePrior& shape() const noexcept { return shape_; }
    const ScalePrior& scale() const noexcept { return scale_; }

    double log_shape(double gamma) const;
    double log_scale(double sigma) const;

    /// Supremum of the shape-prior support.
    double shape_upper() const noexcept;

    /// True when the shape support lies strictly below 1, so every draw has a finite mean.
    bool shape_support_below_one() const noexcept { return shape_upper() < 1.0; }

    std::string describe() const;

private:
    ShapePrior shape_;
    ScalePrior scale_;
};

/// log pi_sh(gamma) + log pi_sc(sigma); -inf outside the parameter space.
double log_prior(const PriorSpec& spec, double gamma, double sigma);
double log_prior(const PriorSpec& spec, const GpParams& theta);

double log_posterior_unnorm(const PriorSpec& spec, const ExceedanceSet& e, const GpParams& theta);

struct SamplerConfig {
    std::uint64_t seed = 1;
    std::size_t burn_in = 5000;
    std::size_t draws = 20000;
    std::size_t thin = 1;
};

struct EffectiveSize {
    double gamma = 0.0;
    double sigma = 0.0;
};

class PosteriorSample {
public:
    /// Wraps externally produced draws (no sampler diagnostics).
    static PosteriorSample from_draws(std::vector<GpParams> draws, bool shape_support_below_one = false);

    std::span<const GpParams> draws() const noexcept { return draws_; }
    std::size_t size() const noexcept { return draws_.size(); }

    double acceptance_rate = 0.0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
    EffectiveSize ess;
    std::vector<std::string> warnings;
    bool prior_shape_below_one = false;

private:
    friend PosteriorSample sample_posterior(const PriorSpec&, const ExceedanceSet&, const SamplerConfig&);
    std::vector<GpParams> draws_;
};

/**
 * @brief Adaptive random-walk Metropolis on (gamma, log sigma).
 *
 * The proposal covariance starts from the inverse observed information at
 * the ML fit (diagonal 0.01 if unavailable) and is replaced by
 * 2.38^2/2 times the running chain covariance during burn-in. Adaptation
 * stops after burn-in. Deterministic given cfg.seed.
 */
PosteriorSample sample_posterior(const PriorSpec& spec, const ExceedanceSet& e, const SamplerConfig& cfg);

/// Type-7 empirical quantile of an ascending array.
double quantile_type7(std::span<const double> sorted, double p);

/// Effective sample size by Geyer's initial monotone sequence.
double effective_sample_size(std::span<const double> chain);

struct CoordinateSummary {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct PosteriorSummary {
    double level = 0.95;
    std::size_t draws = 0;
    CoordinateSummary gamma;
    CoordinateSummary sigma;
    // Finite-endpoint draws only; empty when no draw has gamma < 0 or no threshold was given.
    std::optional<CoordinateSummary> endpoint;
    double endpoint_finite_fraction = 0.0;
};

/// Means and equal-tailed credible intervals; needs at least 100 draws.
PosteriorSummary posterior_summary(const PosteriorSample& ps, double level,
                                   std::optional<double> threshold = std::nullopt);

}  // namespace potpred
