#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "potpred/estimation.hpp"
#include "potpred/predict.hpp"

namespace potpred {

/// Extrapolated quantile X_{n-k,n} + sigma (tau_star^-gamma - 1) / gamma at level tau_e >= tau_i.
double extreme_var(const GpFit& fit, const ExceedanceSet& e, double tau_e);

/// Quantile of an intermediate-level predictive at probability 1 - tau_star.
double var_from_predictive(const PredictiveModel& m, double tau_star);

/// First-order expected shortfall: VaR/(1-gamma) for gamma >= 0, VaR for gamma < 0. Needs gamma < 1.
double es_first_order(double var_value, double gamma);

/**
 * Mean of the predictive law at the given levels. Bayesian models require a
 * shape prior supported strictly below 1; otherwise RuleInapplicableError.
 */
double es_point_forecast(const PredictiveModel& m, const LevelPair& levels);

struct RiskReport {
    double tau_e = 0.0;
    double var_point = 0.0;
    std::optional<double> es_point;
    std::string es_reason;  // why es_point is absent
    Method method = Method::ML;
    std::optional<PredictiveInterval> interval;
};

/// VaR, ES and an optional interval from an intermediate-level model.
RiskReport risk_report(const PredictiveModel& intermediate, Method method, double tau_e,
                       std::optional<double> alpha = std::nullopt);

/// Builds the intermediate-level predictive model from the top k order statistics.
using ModelFactory = std::function<PredictiveModel(std::size_t k)>;

struct ReturnLevelRow {
    double T = 0.0;
    double tau_e = 0.0;
    double point = 0.0;       // fixed-k model, tau_star = (1/T) / (1 - tau_i)
    std::size_t k_tilde = 0;  // effective sample size of the interval model
    double lower = 0.0;
    double upper = 0.0;
};

/**
 * @brief Return levels over a range of periods.
 *
 * The point forecast inverts the k-model at 1 - tau_star with
 * tau_e = 1 - 1/T. The interval comes from the predictive law at tau_e
 * refitted with k_tilde = round(4n/T) so that tau_star = 1/4.
 */
std::vector<ReturnLevelRow> return_level_curve(const ModelFactory& factory, std::size_t n, std::size_t k,
                                               std::span<const double> periods, double alpha);

void write_return_levels_csv(std::ostream& os, std::span<const ReturnLevelRow> rows);

}  // namespace potpred
