#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "potpred/bayes.hpp"
#include "potpred/estimation.hpp"
#include "potpred/gp.hpp"

namespace potpred {

/**
 * @brief Predictive law of a future peak above the extreme threshold.
 *
 * Either a single GP transform with plug-in parameters (frequentist) or an
 * equal-weight mixture of the per-draw transforms (Bayesian). Immutable;
 * the draw set is shared between copies.
 */
class PredictiveModel {
public:
    static PredictiveModel frequentist(const GpParams& p, double threshold, const LevelPair& levels);
    static PredictiveModel bayesian(const PosteriorSample& ps, double threshold, const LevelPair& levels);

    bool is_bayesian() const noexcept { return bayesian_; }
    double threshold() const noexcept { return threshold_; }
    const LevelPair& levels() const noexcept { return levels_; }
    std::span<const GpParams> draws() const noexcept { return *draws_; }

    /// Plug-in parameters of a frequentist model.
    const GpParams& params() const;

    /// Shape prior of the underlying posterior lies strictly below 1 (always true for frequentist models).
    bool finite_mean_guaranteed() const noexcept { return finite_mean_guaranteed_; }

    PredictiveModel with_levels(const LevelPair& levels) const;

    double cdf(double y) const;
    double sf(double y) const;
    double pdf(double y) const;

    /// Inverse cdf at prob in [0, 1).
    double quantile(double prob) const;

    /// Level exceeded with probability v, i.e. quantile(1 - v) computed without cancellation.
    double upper_quantile(double v) const;

    double mean() const;

    /// Smallest interval containing every component support.
    Support support() const;

    /// Finite support endpoints of the components, useful as quadrature breakpoints.
    std::vector<double> kinks() const;

private:
    PredictiveModel(std::shared_ptr<const std::vector<GpParams>> draws, double threshold, const LevelPair& levels,
                    bool bayesian, bool finite_mean);

    double invert(double target, bool upper) const;

    std::shared_ptr<const std::vector<GpParams>> draws_;
    std::vector<AffineLaw> affine_;
    double threshold_;
    LevelPair levels_;
    bool bayesian_;
    bool finite_mean_guaranteed_;
};

PredictiveModel freq_predictive(const GpFit& fit, const LevelPair& levels);

/// Needs at least 100 posterior draws.
PredictiveModel bayes_predictive(const PosteriorSample& ps, double threshold, const LevelPair& levels);

/**
 * Intermediate-level model from the exceedances: plug-in fit for ML/PWM,
 * posterior mixture under the default prior for Bayes.
 */
PredictiveModel intermediate_model(const ExceedanceSet& e, Method method, const SamplerConfig& cfg = {});

struct PredictiveInterval {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    double mass = 0.0;  // model probability of [lower, upper]
};

/// Equal-tailed interval [quantile(alpha/2), quantile(1 - alpha/2)].
PredictiveInterval predictive_interval(const PredictiveModel& m, double alpha);

/// Endpoint-gap rule: tau_star = c^(1/gamma), so that the gap to the endpoint shrinks by c. Needs gamma < 0, c >= 1.
LevelPair extreme_level_from_c(double gamma, double tau_i, double c);

struct ReturnPeriodLevels {
    LevelPair levels;      // tau_e = 1 - 1/T, tau_i = 1 - 4/T, tau_star = 1/4
    std::size_t k_tilde;   // round(4n/T)
};

/// Intermediate level chosen so that tau_star = 1/4; infeasible when 4n/T <= 2 or k_tilde >= n.
ReturnPeriodLevels extreme_level_from_return_period(double T, std::size_t n);

/// tau_i + (1 - tau_i) * H(y) for y above the threshold; model must be at the intermediate level.
double unconditional_tail_cdf(const PredictiveModel& m, double y);

/// (1 - m.cdf(q)) / tau_star; equals 1 when m assigns the true tail mass at the true quantile q.
double tail_equivalence_ratio(const PredictiveModel& m, double oracle_quantile, double tau_star);

struct GridRow {
    double y;
    double pdf;
    double cdf;
};

/// Evenly spaced (y, pdf, cdf) rows on [lo, hi].
std::vector<GridRow> density_grid(const PredictiveModel& m, double lo, double hi, std::size_t points);

void write_grid_csv(std::ostream& os, std::span<const GridRow> rows);

}  // namespace potpred
