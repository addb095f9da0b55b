#include "potpred/risk.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "potpred/errors.hpp"
#include "potpred/parallel.hpp"

namespace potpred {

double extreme_var(const GpFit& fit, const ExceedanceSet& e, double tau_e) {
    if (!(tau_e >= e.tau_i)) {
        std::ostringstream os;
        os << "extreme level " << tau_e << " is below the intermediate level " << e.tau_i;
        throw DomainError(os.str());
    }
    const LevelPair lp(e.tau_i, tau_e);
    return predictive_affine(fit.params, e.threshold, lp).location;
}

double var_from_predictive(const PredictiveModel& m, double tau_star) {
    if (!m.levels().is_intermediate()) throw DomainError("var_from_predictive needs an intermediate-level model");
    if (!(tau_star > 0.0 && tau_star <= 1.0)) throw DomainError("tau_star must lie in (0, 1]");
    if (tau_star == 1.0) return m.quantile(0.0);
    return m.upper_quantile(tau_star);
}

double es_first_order(double var_value, double gamma) {
    if (!(gamma < 1.0)) throw InfiniteMomentError("expected shortfall is infinite for shape >= 1");
    return gamma >= 0.0 ? var_value / (1.0 - gamma) : var_value;
}

double es_point_forecast(const PredictiveModel& m, const LevelPair& levels) {
    if (m.is_bayesian() && !m.finite_mean_guaranteed())
        throw RuleInapplicableError(
            "Bayesian expected shortfall needs a shape prior supported strictly below 1");
    return m.with_levels(levels).mean();
}

RiskReport risk_report(const PredictiveModel& intermediate, Method method, double tau_e,
                       std::optional<double> alpha) {
    const double tau_i = intermediate.levels().tau_i();
    const LevelPair lp(tau_i, tau_e);
    RiskReport r;
    r.tau_e = tau_e;
    r.method = method;
    r.var_point = var_from_predictive(intermediate, lp.tau_star());
    try {
        r.es_point = es_point_forecast(intermediate, lp);
    } catch (const DomainError& err) {
        r.es_reason = err.what();
    }
    if (alpha) r.interval = predictive_interval(intermediate.with_levels(lp), *alpha);
    return r;
}

std::vector<ReturnLevelRow> return_level_curve(const ModelFactory& factory, std::size_t n, std::size_t k,
                                               std::span<const double> periods, double alpha) {
    if (periods.empty()) return {};
    const PredictiveModel base = factory(k);
    const double tail = 1.0 - base.levels().tau_i();
    std::vector<ReturnLevelRow> rows(periods.size());
    for (std::size_t i = 0; i < periods.size(); ++i) {
        const double T = periods[i];
        const ReturnPeriodLevels rp = extreme_level_from_return_period(T, n);
        const double ts = (1.0 / T) / tail;
        if (!(ts <= 1.0)) {
            std::ostringstream os;
            os << "return period " << T << " lies inside the sample tail for k=" << k;
            throw InfeasibleLevelError(os.str());
        }
        rows[i].T = T;
        rows[i].tau_e = 1.0 - 1.0 / T;
        rows[i].point = var_from_predictive(base, ts);
        rows[i].k_tilde = rp.k_tilde;
    }
    parallel_for(periods.size(), [&](std::size_t i) {
        const ReturnPeriodLevels rp = extreme_level_from_return_period(periods[i], n);
        const PredictiveModel m = factory(rp.k_tilde).with_levels(rp.levels);
        const PredictiveInterval pi = predictive_interval(m, alpha);
        rows[i].lower = pi.lower;
        rows[i].upper = pi.upper;
    });
    return rows;
}

void write_return_levels_csv(std::ostream& os, std::span<const ReturnLevelRow> rows) {
    os << "T,tau_e,point,k_tilde,lower,upper\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.T << ',' << r.tau_e << ',' << r.point << ',' << r.k_tilde << ',' << r.lower << ',' << r.upper << '\n';
}

}  // namespace potpred
