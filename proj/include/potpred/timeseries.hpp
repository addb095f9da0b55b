#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "potpred/bayes.hpp"
#include "potpred/estimation.hpp"
#include "potpred/predict.hpp"

namespace potpred {

/// mu_i = intercept + sum_j coefficients[j] * Y_{i-1-j}; xi_i = 1.
struct ArFilter {
    double intercept = 0.0;
    std::vector<double> coefficients;

    std::size_t order() const noexcept { return coefficients.size(); }
};

/// mu_i = mean; xi_i^2 = omega + alpha (Y_{i-1} - mean)^2 + beta xi_{i-1}^2, started at initial_variance.
struct Garch11Filter {
    double mean = 0.0;
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double initial_variance = 1.0;
    bool non_identified = false;  // alpha ~ 0, so beta carries no information
    std::vector<std::string> warnings;
};

struct LocScaleModel {
    std::variant<ArFilter, Garch11Filter> kind;
    std::size_t fitted_on = 0;

    bool is_ar() const noexcept { return std::holds_alternative<ArFilter>(kind); }
    const ArFilter& ar() const { return std::get<ArFilter>(kind); }
    const Garch11Filter& garch() const { return std::get<Garch11Filter>(kind); }
};

/// OLS fit of an AR(p) with intercept. Needs length > 10p; singular designs raise RankDeficientError.
LocScaleModel fit_ar(std::span<const double> series, std::size_t p);

/// Number of leading residuals a GARCH filter drops from POT fitting.
inline constexpr std::size_t kGarchWarmUp = 10;

/**
 * @brief Gaussian quasi-ML fit of a GARCH(1,1) with constant mean.
 *
 * Needs at least 250 observations. Throws ConvergenceError when no start
 * converges and RecursionGuardError when the fitted variance path collapses.
 */
LocScaleModel fit_garch11(std::span<const double> series);

/// Standardized residuals (Y_i - mu_i) / xi_i past the warm-up prefix plus the one-step-ahead filter outputs.
struct ResidualSeries {
    std::vector<double> residuals;
    std::vector<double> mu;  // filter location for each emitted residual
    std::vector<double> xi;  // filter scale for each emitted residual
    double mu_next = 0.0;
    double xi_next = 1.0;
    std::size_t skipped_prefix = 0;
};

ResidualSeries residual_pipeline(std::span<const double> series, const LocScaleModel& model);

/**
 * Residuals from externally computed filter outputs. mu and xi have one entry
 * per observation plus one trailing entry for the next step.
 */
ResidualSeries external_residuals(std::span<const double> series, std::span<const double> mu,
                                  std::span<const double> xi);

/// Observable-scale law y = mu_next + xi_next z of a residual-scale predictive.
class ConditionalPredictive {
public:
    ConditionalPredictive(PredictiveModel residual, double mu, double xi);

    const PredictiveModel& residual() const noexcept { return residual_; }
    double mu() const noexcept { return mu_; }
    double xi() const noexcept { return xi_; }

    ConditionalPredictive with_levels(const LevelPair& levels) const;

    double cdf(double y) const;
    double sf(double y) const;
    double pdf(double y) const;
    double quantile(double prob) const;
    double upper_quantile(double v) const;
    double mean() const;
    PredictiveInterval interval(double alpha) const;

private:
    PredictiveModel residual_;
    double mu_;
    double xi_;
};

/**
 * Fits the top-k residual exceedances by `method` and wraps the predictive at
 * level tau_e (tau_e = tau_i gives the intermediate-level law).
 */
ConditionalPredictive conditional_predictive(const ResidualSeries& rs, std::size_t k, double tau_e, Method method,
                                             const SamplerConfig& cfg = {});

enum class FilterKind { AR, GARCH11, External };

const char* filter_name(FilterKind f) noexcept;
FilterKind parse_filter(const std::string& name);

/// Observations, optionally with external filter outputs (one entry longer than y when given).
struct SeriesInput {
    std::vector<double> y;
    std::vector<double> mu_hat;
    std::vector<double> xi_hat;
};

struct RollingConfig {
    FilterKind filter = FilterKind::AR;
    std::size_t ar_order = 1;
    std::size_t k = 100;
    double tau_e = 0.99;
    double alpha = 0.05;
    Method method = Method::ML;
    SamplerConfig sampler;
    std::uint64_t seed = 1;
};

struct ForecastRow {
    std::size_t origin = 0;  // index of the first observation in the window
    std::size_t target = 0;  // index of the forecast observation
    double mu_next = 0.0;
    double xi_next = 0.0;
    double tau_star = 0.0;
    double var = 0.0;  // conditional quantile at tau_e
    double lower = 0.0;
    double upper = 0.0;
    double realized = 0.0;  // NaN when the target lies past the series
    bool exceeds_var = false;
    bool outside_interval = false;  // a peak (realized > var) outside [lower, upper]
    std::string error;
};

/// One-step-ahead forecasts over windows [j, j + window) for j = 0, stride, 2 stride, ...
std::vector<ForecastRow> rolling_forecast(const SeriesInput& input, std::size_t window, std::size_t stride,
                                          const RollingConfig& cfg);

void write_forecast_csv(std::ostream& os, std::span<const ForecastRow> rows);

}  // namespace potpred
