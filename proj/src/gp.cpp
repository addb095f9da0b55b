#include "potpred/gp.hpp"

#include <cmath>
#include <sstream>

#include "potpred/errors.hpp"

namespace potpred {

namespace {

bool near_zero(double gamma) noexcept { return std::fabs(gamma) < kGammaZeroTol; }

// Standardized excess z = x / sigma lies beyond the finite endpoint -1/gamma.
bool beyond_endpoint(double gamma, double z) noexcept { return gamma < 0.0 && gamma * z <= -1.0; }

void check_probability(double prob) {
    if (!(prob >= 0.0 && prob <= 1.0)) {
        std::ostringstream os;
        os << "probability " << prob << " outside [0, 1]";
        throw DomainError(os.str());
    }
}

}  // namespace

GpParams::GpParams(double gamma, double sigma) : gamma_(gamma), sigma_(sigma) {
    if (!valid(gamma, sigma)) {
        std::ostringstream os;
        os << "invalid GP parameters (gamma=" << gamma << ", sigma=" << sigma
           << "): need gamma > -1/2 and sigma > 0";
        throw DomainError(os.str());
    }
}

bool GpParams::valid(double gamma, double sigma) noexcept {
    return std::isfinite(gamma) && std::isfinite(sigma) && gamma > -0.5 && sigma > 0.0;
}

Support support(const GpParams& p) noexcept {
    if (p.gamma() < 0.0 && !near_zero(p.gamma())) return {0.0, -p.sigma() / p.gamma()};
    return {0.0, kInf};
}

LevelPair::LevelPair(double tau_i, double tau_e) : tau_i_(tau_i), tau_e_(tau_e), tau_star_(1.0) {
    if (!(tau_i > 0.0 && tau_i < 1.0)) throw DomainError("intermediate level must lie in (0, 1)");
    if (!(tau_e >= tau_i && tau_e < 1.0))
        throw DomainError("extreme level must lie in [tau_i, 1)");
    tau_star_ = tau_e == tau_i ? 1.0 : (1.0 - tau_e) / (1.0 - tau_i);
}

LevelPair::LevelPair(double tau_i, double tau_e, double tau_star)
    : tau_i_(tau_i), tau_e_(tau_e), tau_star_(tau_star) {}

LevelPair LevelPair::intermediate(double tau_i) { return LevelPair(tau_i, tau_i); }

LevelPair LevelPair::from_ratio(double tau_i, double tau_star) {
    if (!(tau_i > 0.0 && tau_i < 1.0)) throw DomainError("intermediate level must lie in (0, 1)");
    if (!(tau_star > 0.0 && tau_star <= 1.0)) throw DomainError("tau_star must lie in (0, 1]");
    if (tau_star == 1.0) return LevelPair(tau_i, tau_i, 1.0);
    const double tau_e = 1.0 - tau_star * (1.0 - tau_i);
    if (!(tau_e < 1.0)) throw InfeasibleLevelError("extreme level rounds to 1");
    return LevelPair(tau_i, tau_e, tau_star);
}

double gp_cdf(const GpParams& p, double x) noexcept {
    if (!(x > 0.0)) return 0.0;
    const double z = x / p.sigma();
    const double g = p.gamma();
    if (near_zero(g)) return -std::expm1(-z);
    if (beyond_endpoint(g, z)) return 1.0;
    return -std::expm1(-std::log1p(g * z) / g);
}

double gp_sf(const GpParams& p, double x) noexcept {
    if (!(x > 0.0)) return 1.0;
    const double z = x / p.sigma();
    const double g = p.gamma();
    if (near_zero(g)) return std::exp(-z);
    if (beyond_endpoint(g, z)) return 0.0;
    return std::exp(-std::log1p(g * z) / g);
}

double gp_logpdf(const GpParams& p, double x) noexcept {
    if (x < 0.0) return -kInf;
    const double z = x / p.sigma();
    const double g = p.gamma();
    if (near_zero(g)) return -std::log(p.sigma()) - z;
    if (beyond_endpoint(g, z)) return -kInf;
    return -std::log(p.sigma()) - (1.0 / g + 1.0) * std::log1p(g * z);
}

double gp_pdf(const GpParams& p, double x) noexcept {
    const double lp = gp_logpdf(p, x);
    return lp == -kInf ? 0.0 : std::exp(lp);
}

double gp_upper_quantile(const GpParams& p, double v) {
    check_probability(v);
    const double g = p.gamma();
    if (v == 0.0) {
        if (g >= 0.0 || near_zero(g))
            throw UnboundedQuantileError("quantile at probability 1 is infinite for gamma >= 0");
        return -p.sigma() / g;
    }
    const double lv = std::log(v);
    if (near_zero(g)) return -p.sigma() * lv;
    return p.sigma() * std::expm1(-g * lv) / g;
}

double gp_quantile(const GpParams& p, double prob) {
    check_probability(prob);
    const double g = p.gamma();
    if (prob == 1.0) return gp_upper_quantile(p, 0.0);
    const double l = std::log1p(-prob);
    if (near_zero(g)) return -p.sigma() * l;
    return p.sigma() * std::expm1(-g * l) / g;
}

double gp_mean(const GpParams& p) {
    if (p.gamma() >= 1.0) throw InfiniteMomentError("GP mean is infinite for gamma >= 1");
    return p.sigma() / (1.0 - p.gamma());
}

GpParams threshold_shift(const GpParams& p, double u) {
    if (!(u >= 0.0)) throw DomainError("threshold shift must be nonnegative");
    const double shifted = p.sigma() + p.gamma() * u;
    if (!(shifted > 0.0)) {
        std::ostringstream os;
        os << "threshold " << u << " lies at or beyond the endpoint " << -p.sigma() / p.gamma();
        throw BeyondEndpointError(os.str());
    }
    return GpParams(p.gamma(), shifted);
}

AffineLaw predictive_affine(const GpParams& p, double t_i, const LevelPair& levels) noexcept {
    if (levels.is_intermediate()) return {t_i, 1.0};
    const double g = p.gamma();
    const double log_ts = std::log(levels.tau_star());
    const double scale = std::exp(-g * log_ts);
    const double offset = near_zero(g) ? -p.sigma() * log_ts : p.sigma() * std::expm1(-g * log_ts) / g;
    return {t_i + offset, scale};
}

double predictive_cdf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    return gp_cdf(p, (y - a.location) / a.scale);
}

double predictive_sf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    return gp_sf(p, (y - a.location) / a.scale);
}

double predictive_pdf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    return gp_pdf(p, (y - a.location) / a.scale) / a.scale;
}

double predictive_quantile(const GpParams& p, double t_i, const LevelPair& levels, double prob) {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    return a.location + a.scale * gp_quantile(p, prob);
}

double predictive_mean(const GpParams& p, double t_i, const LevelPair& levels) {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    return a.location + a.scale * gp_mean(p);
}

Support predictive_support(const GpParams& p, double t_i, const LevelPair& levels) noexcept {
    const AffineLaw a = predictive_affine(p, t_i, levels);
    const Support s = support(p);
    return {a.location, s.bounded() ? a.location + a.scale * s.upper : kInf};
}

double w_gamma(double gamma, double x) {
    if (!(x > 0.0)) throw DomainError("w_gamma requires x > 0");
    if (near_zero(gamma)) {
        const double l = std::log(x);
        return l * l;
    }
    if (gamma > 0.0) return std::log(x);
    return std::pow(x, -gamma);
}

}  // namespace potpred
