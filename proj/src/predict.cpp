#include "potpred/predict.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "potpred/errors.hpp"

namespace potpred {

namespace {

constexpr std::size_t kMinMixtureDraws = 100;
constexpr int kMaxBisection = 400;

}  // namespace

PredictiveModel::PredictiveModel(std::shared_ptr<const std::vector<GpParams>> draws, double threshold,
                                 const LevelPair& levels, bool bayesian, bool finite_mean)
    : draws_(std::move(draws)),
      threshold_(threshold),
      levels_(levels),
      bayesian_(bayesian),
      finite_mean_guaranteed_(finite_mean) {
    affine_.reserve(draws_->size());
    for (const GpParams& p : *draws_) affine_.push_back(predictive_affine(p, threshold_, levels_));
}

PredictiveModel PredictiveModel::frequentist(const GpParams& p, double threshold, const LevelPair& levels) {
    return PredictiveModel(std::make_shared<const std::vector<GpParams>>(1, p), threshold, levels, false, true);
}

PredictiveModel PredictiveModel::bayesian(const PosteriorSample& ps, double threshold, const LevelPair& levels) {
    auto draws = std::make_shared<const std::vector<GpParams>>(ps.draws().begin(), ps.draws().end());
    return PredictiveModel(std::move(draws), threshold, levels, true, ps.prior_shape_below_one);
}

const GpParams& PredictiveModel::params() const {
    if (bayesian_) throw DomainError("a Bayesian predictive model has no single parameter value");
    return draws_->front();
}

PredictiveModel PredictiveModel::with_levels(const LevelPair& levels) const {
    return PredictiveModel(draws_, threshold_, levels, bayesian_, finite_mean_guaranteed_);
}

double PredictiveModel::cdf(double y) const {
    const auto& d = *draws_;
    if (!bayesian_) return gp_cdf(d[0], (y - affine_[0].location) / affine_[0].scale);
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) s += gp_cdf(d[j], (y - affine_[j].location) / affine_[j].scale);
    return s / static_cast<double>(d.size());
}

double PredictiveModel::sf(double y) const {
    const auto& d = *draws_;
    if (!bayesian_) return gp_sf(d[0], (y - affine_[0].location) / affine_[0].scale);
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) s += gp_sf(d[j], (y - affine_[j].location) / affine_[j].scale);
    return s / static_cast<double>(d.size());
}

double PredictiveModel::pdf(double y) const {
    const auto& d = *draws_;
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j)
        s += gp_pdf(d[j], (y - affine_[j].location) / affine_[j].scale) / affine_[j].scale;
    return s / static_cast<double>(d.size());
}

double PredictiveModel::invert(double target, bool upper) const {
    const auto& d = *draws_;
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double x = upper ? gp_upper_quantile(d[j], target) : gp_quantile(d[j], target);
        const double q = affine_[j].location + affine_[j].scale * x;
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    if (lo == hi) return lo;
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw NumericError("mixture quantile bracket is not finite");
    // Mixture cdf at lo is <= target and at hi is >= target; shrink until the bracket is tight.
    for (int it = 0; it < kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 1e-10 * std::max(1.0, std::fabs(mid)) || mid == lo || mid == hi) return mid;
        const bool below = upper ? sf(mid) > target : cdf(mid) < target;
        (below ? lo : hi) = mid;
    }
    std::ostringstream os;
    os << "mixture quantile bisection did not converge on [" << lo << ", " << hi << "]";
    throw NumericError(os.str());
}

double PredictiveModel::quantile(double prob) const {
    if (!bayesian_) return predictive_quantile(draws_->front(), threshold_, levels_, prob);
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("probability outside [0, 1]");
    return invert(prob, false);
}

double PredictiveModel::upper_quantile(double v) const {
    if (!bayesian_) return affine_[0].location + affine_[0].scale * gp_upper_quantile(draws_->front(), v);
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("probability outside [0, 1]");
    return invert(v, true);
}

double PredictiveModel::mean() const {
    const auto& d = *draws_;
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j].gamma() >= 1.0) {
            std::ostringstream os;
            os << "predictive mean is infinite: shape " << d[j].gamma() << " >= 1";
            throw InfiniteMomentError(os.str());
        }
        s += affine_[j].location + affine_[j].scale * gp_mean(d[j]);
    }
    return s / static_cast<double>(d.size());
}

Support PredictiveModel::support() const {
    const auto& d = *draws_;
    Support out{kInf, -kInf};
    for (std::size_t j = 0; j < d.size(); ++j) {
        const Support s = potpred::support(d[j]);
        out.lower = std::min(out.lower, affine_[j].location);
        out.upper = std::max(out.upper, s.bounded() ? affine_[j].location + affine_[j].scale * s.upper : kInf);
    }
    return out;
}

std::vector<double> PredictiveModel::kinks() const {
    const auto& d = *draws_;
    std::vector<double> k;
    k.reserve(2 * d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
        k.push_back(affine_[j].location);
        const Support s = potpred::support(d[j]);
        if (s.bounded()) k.push_back(affine_[j].location + affine_[j].scale * s.upper);
    }
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

PredictiveModel freq_predictive(const GpFit& fit, const LevelPair& levels) {
    return PredictiveModel::frequentist(fit.params, fit.threshold, levels);
}

PredictiveModel bayes_predictive(const PosteriorSample& ps, double threshold, const LevelPair& levels) {
    if (ps.size() < kMinMixtureDraws) {
        std::ostringstream os;
        os << "Bayesian predictive needs at least " << kMinMixtureDraws << " draws, got " << ps.size();
        throw DomainError(os.str());
    }
    return PredictiveModel::bayesian(ps, threshold, levels);
}

PredictiveModel intermediate_model(const ExceedanceSet& e, Method method, const SamplerConfig& cfg) {
    const LevelPair lp = LevelPair::intermediate(e.tau_i);
    switch (method) {
        case Method::ML:
            return freq_predictive(fit_ml(e), lp);
        case Method::PWM:
            return freq_predictive(fit_pwm(e), lp);
        case Method::Bayes:
            return bayes_predictive(sample_posterior(PriorSpec::default_for(e), e, cfg), e.threshold, lp);
    }
    throw DomainError("unknown estimation method");
}

PredictiveInterval predictive_interval(const PredictiveModel& m, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    PredictiveInterval pi;
    pi.alpha = alpha;
    pi.lower = m.quantile(0.5 * alpha);
    pi.upper = m.upper_quantile(0.5 * alpha);
    pi.mass = m.cdf(pi.upper) - m.cdf(pi.lower);
    return pi;
}

LevelPair extreme_level_from_c(double gamma, double tau_i, double c) {
    if (!(gamma < 0.0)) {
        std::ostringstream os;
        os << "the endpoint-gap rule needs a negative shape, got " << gamma;
        throw RuleInapplicableError(os.str());
    }
    if (!(c >= 1.0) || !std::isfinite(c)) throw DomainError("scaling factor c must be >= 1");
    return LevelPair::from_ratio(tau_i, std::pow(c, 1.0 / gamma));
}

ReturnPeriodLevels extreme_level_from_return_period(double T, std::size_t n) {
    if (!(T >= 2.0) || !std::isfinite(T)) throw DomainError("return period must be >= 2");
    const double kt = 4.0 * static_cast<double>(n) / T;
    const auto k_tilde = static_cast<std::size_t>(std::llround(kt));
    if (!(kt > 2.0) || k_tilde >= n) {
        std::ostringstream os;
        os << "return period " << T << " is infeasible for n=" << n << " (4n/T = " << kt << ")";
        throw InfeasibleLevelError(os.str());
    }
    return {LevelPair::from_ratio(1.0 - 4.0 / T, 0.25), k_tilde};
}

double unconditional_tail_cdf(const PredictiveModel& m, double y) {
    if (!m.levels().is_intermediate()) throw DomainError("unconditional tail cdf needs a model at the intermediate level");
    if (!(y > m.threshold())) throw DomainError("unconditional tail cdf is defined above the threshold only");
    const double ti = m.levels().tau_i();
    return ti + (1.0 - ti) * m.cdf(y);
}

double tail_equivalence_ratio(const PredictiveModel& m, double oracle_quantile, double tau_star) {
    if (!(tau_star > 0.0 && tau_star <= 1.0)) throw DomainError("tau_star must lie in (0, 1]");
    return m.sf(oracle_quantile) / tau_star;
}

std::vector<GridRow> density_grid(const PredictiveModel& m, double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo)) throw DomainError("grid needs at least 2 points and hi > lo");
    std::vector<GridRow> rows;
    rows.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double y = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        rows.push_back({y, m.pdf(y), m.cdf(y)});
    }
    return rows;
}

void write_grid_csv(std::ostream& os, std::span<const GridRow> rows) {
    os << "y,pdf,cdf\n";
    os << std::setprecision(17);
    for (const GridRow& r : rows) os << r.y << ',' << r.pdf << ',' << r.cdf << '\n';
}

}  // namespace potpred
