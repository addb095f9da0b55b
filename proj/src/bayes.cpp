#include "potpred/bayes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "potpred/errors.hpp"
#include "potpred/quadrature.hpp"
#include "potpred/random.hpp"

namespace potpred {

namespace {

constexpr double kAmScale = 2.38 * 2.38 / 2.0;
constexpr double kLowAcceptance = 0.1;
constexpr double kHighAcceptance = 0.6;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double truncated_normal_log_norm(const TruncatedNormalShape& tn) {
    const boost::math::normal_distribution<double> z;
    const double hi = std::isinf(tn.upper) ? 1.0 : boost::math::cdf(z, (tn.upper - tn.mean) / tn.sd);
    const double lo = boost::math::cdf(z, (-0.5 - tn.mean) / tn.sd);
    return std::log(tn.sd) + 0.5 * std::log(2.0 * M_PI) + std::log(hi - lo);
}

// Numerical screen of a custom shape density: integrable near -1/2, bounded for gamma > 0.
void validate_custom(const CustomShape& c) {
    if (!c.log_density) throw DomainError("custom shape prior has no density");
    if (!(c.upper > -0.5)) throw DomainError("custom shape prior support is empty");
    const auto dens = [&](double g) {
        const double l = c.log_density(g);
        if (std::isnan(l) || l == kInf) throw DomainError("custom shape prior log-density is not finite at " +
                                                          std::to_string(g));
        return std::exp(l);
    };
    const double neg_hi = std::min(0.0, c.upper);
    try {
        const QuadratureResult r = integrate(dens, -0.5, neg_hi, 1e-6);
        if (!std::isfinite(r.value)) throw NumericError("non-finite integral");
    } catch (const NumericError&) {
        throw DomainError("custom shape prior is not integrable on (-1/2, 0)");
    }
    if (c.upper <= 0.0) return;

    // A bounded density is flat near 0+ and cannot keep growing far out; log-growth
    // over four decades signals a singularity or an unbounded tail.
    const auto ld = [&](double g) { return std::log(dens(g)); };
    double sup = -kInf;
    const double hi = std::min(c.upper, 1e3);
    for (int i = 0; i <= 4000; ++i) {
        const double g = std::exp(std::log(1e-10) + (std::log(hi) - std::log(1e-10)) * i / 4000.0);
        if (g >= c.upper) break;
        sup = std::max(sup, ld(g));
    }
    if (sup == kInf) throw DomainError("custom shape prior is unbounded on (0, inf)");
    const double near = std::min(1e-6, 0.5 * c.upper);
    if (ld(near * 1e-4) - ld(near) > 1.0) throw DomainError("custom shape prior is unbounded near 0+");
    if (std::isinf(c.upper) && ld(1e4) - ld(1.0) > 1.0)
        throw DomainError("custom shape prior is unbounded on (0, inf)");
}

void validate_scale(const ScalePrior& s) {
    if (const auto* d = std::get_if<DataDependentScale>(&s)) {
        if (!(d->a > 0.0 && d->b > 0.0 && std::isfinite(d->a) && std::isfinite(d->b)))
            throw DomainError("scale prior base needs positive finite shape and rate");
        if (!(d->anchor > 0.0 && std::isfinite(d->anchor)))
            throw DomainError("scale prior anchor must be positive");
    }
}

double fast_loglik(std::span<const double> x, double g, double eta) {
    if (!(g > -0.5)) return -kInf;
    const double inv_s = std::exp(-eta);
    const double m = static_cast<double>(x.size());
    if (g < 0.0 && g * x.back() * inv_s <= -1.0) return -kInf;
    if (std::fabs(g) < kGammaZeroTol) {
        double s = 0.0;
        for (double v : x) s += v;
        return -m * eta - s * inv_s;
    }
    double s = 0.0;
    for (double v : x) s += std::log1p(g * v * inv_s);
    return -m * eta - (1.0 / g + 1.0) * s;
}

struct Chol2 {
    double l11 = 0.0, l21 = 0.0, l22 = 0.0;
};

std::optional<Chol2> cholesky(const std::array<double, 3>& c) {  // (c11, c12, c22)
    if (!(c[0] > 0.0)) return std::nullopt;
    const double l11 = std::sqrt(c[0]);
    const double l21 = c[1] / l11;
    const double d = c[2] - l21 * l21;
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    return Chol2{l11, l21, std::sqrt(d)};
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

PriorSpec::PriorSpec(ShapePrior shape, ScalePrior scale) : shape_(std::move(shape)), scale_(std::move(scale)) {
    std::visit(Overloaded{
                   [](const TruncatedNormalShape& tn) {
                       if (!(tn.sd > 0.0 && std::isfinite(tn.sd) && std::isfinite(tn.mean)))
                           throw DomainError("truncated normal shape prior needs finite mean and sd > 0");
                       if (!(tn.upper > -0.5)) throw DomainError("truncated normal upper bound must exceed -1/2");
                   },
                   [](const UniformWindowShape& u) {
                       if (!(u.lo >= -0.5 && u.hi > u.lo && std::isfinite(u.hi)))
                           throw DomainError("uniform shape window must satisfy -1/2 <= lo < hi < inf");
                   },
                   [](const CustomShape& c) { validate_custom(c); },
               },
               shape_);
    validate_scale(scale_);
}

PriorSpec PriorSpec::default_for(const ExceedanceSet& e) {
    double anchor = 0.0;
    try {
        anchor = fit_pwm(e).params.sigma();
    } catch (const Error&) {
        anchor = mean_of(e.excesses);
    }
    return PriorSpec(TruncatedNormalShape{}, DataDependentScale{ScaleBase::Gamma, 1.0, 1.0, anchor});
}

double PriorSpec::log_shape(double g) const {
    if (!(g > -0.5)) return -kInf;
    return std::visit(Overloaded{
                          [g](const TruncatedNormalShape& tn) {
                              if (!(g < tn.upper)) return -kInf;
                              const double z = (g - tn.mean) / tn.sd;
                              return -0.5 * z * z - truncated_normal_log_norm(tn);
                          },
                          [g](const UniformWindowShape& u) {
                              if (!(g > u.lo && g < u.hi)) return -kInf;
                              return -std::log(u.hi - u.lo);
                          },
                          [g](const CustomShape& c) {
                              if (!(g < c.upper)) return -kInf;
                              return c.log_density(g);
                          },
                      },
                      shape_);
}

double PriorSpec::log_scale(double sigma) const {
    if (!(sigma > 0.0)) return -kInf;
    return std::visit(Overloaded{
                          [sigma](const DataDependentScale& d) {
                              const double u = sigma / d.anchor;
                              const double c = d.a * std::log(d.b) - std::lgamma(d.a) - std::log(d.anchor);
                              if (d.base == ScaleBase::Gamma) return c + (d.a - 1.0) * std::log(u) - d.b * u;
                              return c - (d.a + 1.0) * std::log(u) - d.b / u;
                          },
                          [sigma](const LogUniformScale&) { return -std::log(sigma); },
                      },
                      scale_);
}

double PriorSpec::shape_upper() const noexcept {
    return std::visit(Overloaded{
                          [](const TruncatedNormalShape& tn) { return tn.upper; },
                          [](const UniformWindowShape& u) { return u.hi; },
                          [](const CustomShape& c) { return c.upper; },
                      },
                      shape_);
}

std::string PriorSpec::describe() const {
    std::ostringstream os;
    std::visit(Overloaded{
                   [&](const TruncatedNormalShape& tn) {
                       os << "shape ~ truncated-normal(" << tn.mean << ", " << tn.sd << ") on (-0.5, " << tn.upper
                          << ")";
                   },
                   [&](const UniformWindowShape& u) { os << "shape ~ uniform(" << u.lo << ", " << u.hi << ")"; },
                   [&](const CustomShape& c) { os << "shape ~ " << c.name << " on (-0.5, " << c.upper << ")"; },
               },
               shape_);
    std::visit(Overloaded{
                   [&](const DataDependentScale& d) {
                       os << "; scale ~ " << (d.base == ScaleBase::Gamma ? "gamma" : "inverse-gamma") << "(" << d.a
                          << ", " << d.b << ") anchored at " << d.anchor;
                   },
                   [&](const LogUniformScale&) { os << "; scale ~ log-uniform"; },
               },
               scale_);
    return os.str();
}

double log_prior(const PriorSpec& spec, double gamma, double sigma) {
    if (!GpParams::valid(gamma, sigma)) return -kInf;
    const double ls = spec.log_shape(gamma);
    if (ls == -kInf) return -kInf;
    return ls + spec.log_scale(sigma);
}

double log_prior(const PriorSpec& spec, const GpParams& theta) {
    return log_prior(spec, theta.gamma(), theta.sigma());
}

double log_posterior_unnorm(const PriorSpec& spec, const ExceedanceSet& e, const GpParams& theta) {
    const double lp = log_prior(spec, theta);
    if (lp == -kInf) return -kInf;
    const double ll = gp_loglik(theta, e.excesses);
    if (ll == -kInf) return -kInf;
    return ll + lp;
}

PosteriorSample PosteriorSample::from_draws(std::vector<GpParams> draws, bool shape_support_below_one) {
    if (draws.empty()) throw DomainError("posterior sample needs at least one draw");
    PosteriorSample ps;
    ps.draws_ = std::move(draws);
    ps.acceptance_rate = std::nan("");
    ps.prior_shape_below_one = shape_support_below_one;
    return ps;
}

PosteriorSample sample_posterior(const PriorSpec& spec, const ExceedanceSet& e, const SamplerConfig& cfg) {
    if (e.size() < 2) throw DomainError("posterior sampling needs at least 2 positive excesses");
    if (cfg.draws < 1 || cfg.thin < 1) throw DomainError("sampler needs draws >= 1 and thin >= 1");
    const std::span<const double> x = e.excesses;
    const auto target = [&](double g, double eta) {
        const double lp = log_prior(spec, g, std::exp(eta));
        if (lp == -kInf) return -kInf;
        const double ll = fast_loglik(x, g, eta);
        if (ll == -kInf) return -kInf;
        return ll + lp + eta;
    };

    // Starting point and initial proposal from the ML fit when available.
    std::array<double, 2> cur{0.1, std::log(mean_of(x))};
    std::array<double, 3> cov0{0.01, 0.0, 0.01};
    bool have_start = false;
    try {
        const GpFit f = fit_ml(e);
        cur = {f.params.gamma(), std::log(f.params.sigma())};
        have_start = true;
        if (const auto info = ml_observed_information(e, f.params)) {
            const auto& h = *info;
            const double det = h[0] * h[3] - h[1] * h[2];
            cov0 = {kAmScale * h[3] / det, -kAmScale * h[1] / det, kAmScale * h[0] / det};
        }
    } catch (const Error&) {
    }
    if (!have_start) {
        try {
            const GpFit f = fit_pwm(e);
            cur = {f.params.gamma(), std::log(f.params.sigma())};
        } catch (const Error&) {
        }
    }
    double cur_lp = target(cur[0], cur[1]);
    if (cur_lp == -kInf) {
        // Scan shapes inside the prior support with a feasible scale.
        const double hi = std::min(spec.shape_upper(), 3.0);
        const double mx = x.back();
        const double mean = mean_of(x);
        for (int i = 1; i < 200; ++i) {
            const double g = -0.5 + (hi + 0.5) * i / 200.0;
            const double s = std::max(mean * std::max(1.0 - g, 0.1), g < 0.0 ? -g * mx * 1.1 : 0.0);
            const double lp = target(g, std::log(s));
            if (lp > cur_lp) {
                cur = {g, std::log(s)};
                cur_lp = lp;
            }
        }
        if (cur_lp == -kInf) throw SamplerFailure("no starting point with positive posterior density");
    }
    if (!cholesky(cov0)) cov0 = {0.01, 0.0, 0.01};

    Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Chol2 chol = *cholesky(cov0);

    const std::size_t total = cfg.burn_in + cfg.draws * cfg.thin;
    const std::size_t adapt_start = std::min<std::size_t>(500, cfg.burn_in / 2);
    std::array<double, 2> run_mean{0.0, 0.0};
    std::array<double, 3> run_m2{0.0, 0.0, 0.0};
    std::size_t accepted = 0;

    PosteriorSample ps;
    ps.draws_.reserve(cfg.draws);
    std::vector<double> gs;
    std::vector<double> ss;
    gs.reserve(cfg.draws);
    ss.reserve(cfg.draws);

    for (std::size_t t = 0; t < total; ++t) {
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        const double pg = cur[0] + chol.l11 * z1;
        const double pe = cur[1] + chol.l21 * z1 + chol.l22 * z2;
        const double plp = target(pg, pe);
        const double log_u = std::log(uniform_open(rng));
        if (plp != -kInf && log_u < plp - cur_lp) {
            cur = {pg, pe};
            cur_lp = plp;
            if (t >= cfg.burn_in) ++accepted;
        }

        if (t < cfg.burn_in) {
            const double n = static_cast<double>(t + 1);
            const double d0 = cur[0] - run_mean[0];
            const double d1 = cur[1] - run_mean[1];
            run_mean[0] += d0 / n;
            run_mean[1] += d1 / n;
            run_m2[0] += d0 * (cur[0] - run_mean[0]);
            run_m2[1] += d0 * (cur[1] - run_mean[1]);
            run_m2[2] += d1 * (cur[1] - run_mean[1]);
            if (t + 1 >= adapt_start && t >= 1) {
                const std::array<double, 3> c{kAmScale * (run_m2[0] / (n - 1.0) + 1e-10), kAmScale * run_m2[1] / (n - 1.0),
                                              kAmScale * (run_m2[2] / (n - 1.0) + 1e-10)};
                if (const auto l = cholesky(c)) chol = *l;
            }
            continue;
        }
        if ((t - cfg.burn_in + 1) % cfg.thin == 0) {
            const double sigma = std::exp(cur[1]);
            ps.draws_.emplace_back(cur[0], sigma);
            gs.push_back(cur[0]);
            ss.push_back(sigma);
        }
    }

    ps.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.draws * cfg.thin);
    ps.burn_in = cfg.burn_in;
    ps.thin = cfg.thin;
    ps.seed = cfg.seed;
    ps.prior_shape_below_one = spec.shape_support_below_one();
    if (accepted == 0) throw SamplerFailure("every proposal after burn-in was rejected");
    ps.ess = {effective_sample_size(gs), effective_sample_size(ss)};

    if (ps.acceptance_rate < kLowAcceptance || ps.acceptance_rate > kHighAcceptance) {
        std::ostringstream os;
        os << "acceptance rate " << ps.acceptance_rate << " outside [" << kLowAcceptance << ", " << kHighAcceptance
           << "]";
        ps.warnings.push_back(os.str());
    }
    const auto edge_fraction = [&](double lo, double hi) {
        const double band = 0.025 * (hi - lo);
        std::size_t near = 0;
        for (double g : gs)
            if (g - lo < band || hi - g < band) ++near;
        return static_cast<double>(near) / static_cast<double>(gs.size());
    };
    double lo = -0.5;
    double hi = spec.shape_upper();
    if (const auto* u = std::get_if<UniformWindowShape>(&spec.shape())) lo = u->lo;
    if (std::isfinite(hi) && edge_fraction(lo, hi) > 0.1) {
        std::ostringstream os;
        os << "posterior shape draws pile up at the prior support boundary (" << lo << ", " << hi << ")";
        ps.warnings.push_back(os.str());
    }
    return ps;
}

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of an empty array");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double effective_sample_size(std::span<const double> chain) {
    const std::size_t n = chain.size();
    if (n < 4) return static_cast<double>(n);
    const double mean = mean_of(chain);
    const auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - mean) * (chain[i + lag] - mean);
        return s / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0)) return static_cast<double>(n);
    double tau = -1.0;
    double prev = kInf;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev);
        prev = pair;
        tau += 2.0 * pair;
    }
    return static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
}

PosteriorSummary posterior_summary(const PosteriorSample& ps, double level, std::optional<double> threshold) {
    if (ps.size() < 100) {
        std::ostringstream os;
        os << "posterior summary needs at least 100 draws, got " << ps.size();
        throw DomainError(os.str());
    }
    if (!(level > 0.0 && level < 1.0)) throw DomainError("credible level must lie in (0, 1)");
    const double a = 0.5 * (1.0 - level);
    const auto summarize = [&](std::vector<double> v) {
        CoordinateSummary c;
        c.mean = mean_of(v);
        std::sort(v.begin(), v.end());
        c.lower = quantile_type7(v, a);
        c.upper = quantile_type7(v, 1.0 - a);
        return c;
    };
    std::vector<double> g;
    std::vector<double> s;
    std::vector<double> ep;
    for (const GpParams& d : ps.draws()) {
        g.push_back(d.gamma());
        s.push_back(d.sigma());
        if (threshold && d.gamma() < 0.0) ep.push_back(*threshold - d.sigma() / d.gamma());
    }
    PosteriorSummary out;
    out.level = level;
    out.draws = ps.size();
    out.gamma = summarize(std::move(g));
    out.sigma = summarize(std::move(s));
    out.endpoint_finite_fraction = static_cast<double>(ep.size()) / static_cast<double>(ps.size());
    if (!ep.empty()) out.endpoint = summarize(std::move(ep));
    return out;
}

}  // namespace potpred
