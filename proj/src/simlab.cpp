#include "potpred/simlab.hpp"

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "potpred/errors.hpp"
#include "potpred/parallel.hpp"
#include "potpred/predict.hpp"
#include "potpred/quadrature.hpp"
#include "potpred/risk.hpp"
#include "potpred/timeseries.hpp"

namespace potpred {

namespace {

constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kSamplerStream = 3;
constexpr std::uint64_t kSeriesStream = 4;
constexpr std::size_t kMinReplications = 50;
constexpr std::size_t kSeriesBurnIn = 200;

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

std::string arm_name(Method m) { return method_name(m); }

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

struct ArmModel {
    std::optional<PredictiveModel> model;
    RepStatus status = RepStatus::Ok;
    std::string error;
};

PosteriorSample thinned(const PosteriorSample& ps, std::size_t cap) {
    if (cap == 0 || ps.size() <= cap) return ps;
    const std::size_t step = (ps.size() + cap - 1) / cap;
    std::vector<GpParams> d;
    for (std::size_t i = step - 1; i < ps.size(); i += step) d.push_back(ps.draws()[i]);
    return PosteriorSample::from_draws(std::move(d), ps.prior_shape_below_one);
}

// Intermediate-level model for one arm; ML failures fall back to PWM.
ArmModel fit_arm(const ExceedanceSet& e, Method method, const SamplerConfig& sampler, std::size_t max_draws) {
    ArmModel out;
    try {
        if (method == Method::Bayes) {
            const PosteriorSample ps = sample_posterior(PriorSpec::default_for(e), e, sampler);
            out.model = bayes_predictive(thinned(ps, max_draws), e.threshold, LevelPair::intermediate(e.tau_i));
        } else {
            out.model = intermediate_model(e, method, sampler);
        }
        return out;
    } catch (const Error& err) {
        out.error = err.what();
        if (method != Method::ML) {
            out.status = RepStatus::Failed;
            return out;
        }
    }
    try {
        out.model = intermediate_model(e, Method::PWM);
        out.status = RepStatus::Fallback;
    } catch (const Error& err) {
        out.status = RepStatus::Failed;
        out.error += std::string("; PWM fallback: ") + err.what();
    }
    return out;
}

SamplerConfig sampler_for(const SamplerConfig& base, std::uint64_t root, std::uint64_t n, std::size_t r) {
    SamplerConfig s = base;
    s.seed = derive_seed(derive_seed(root, kSamplerStream, n), 0, r);
    return s;
}

Generator replicate_generator(const Generator& g, std::uint64_t root, std::uint64_t n, std::size_t r) {
    return g.with_seed(derive_seed(derive_seed(root, kSampleStream, n), 0, r));
}

// Ladder rungs share a seed, so replication r at a larger n extends the draws used at a smaller n.
Generator nested_generator(const Generator& g, std::uint64_t root, std::size_t r) {
    return g.with_seed(derive_seed(derive_seed(root, kSampleStream, 0), 1, r));
}

std::vector<std::size_t> ladder_of(const ExperimentConfig& cfg) {
    return cfg.n_ladder.empty() ? std::vector<std::size_t>{cfg.n} : cfg.n_ladder;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

const char* family_name(Family f) noexcept {
    switch (f) {
        case Family::ExactGP: return "exact-gp";
        case Family::Pareto: return "pareto";
        case Family::Frechet: return "frechet";
        case Family::Burr: return "burr";
        case Family::Exponential: return "exponential";
        case Family::Beta: return "beta";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    for (Family f : {Family::ExactGP, Family::Pareto, Family::Frechet, Family::Burr, Family::Exponential,
                     Family::Beta})
        if (name == family_name(f)) return f;
    throw DomainError("unknown generator family '" + name + "'");
}

Generator Generator::exact_gp(double gamma, double sigma, std::uint64_t seed) {
    return {Family::ExactGP, gamma, sigma, seed};
}
Generator Generator::pareto(double alpha, std::uint64_t seed) { return {Family::Pareto, alpha, 0.0, seed}; }
Generator Generator::frechet(double alpha, std::uint64_t seed) { return {Family::Frechet, alpha, 0.0, seed}; }
Generator Generator::burr(double c, double k, std::uint64_t seed) { return {Family::Burr, c, k, seed}; }
Generator Generator::exponential(double rate, std::uint64_t seed) { return {Family::Exponential, rate, 0.0, seed}; }
Generator Generator::beta(double a, double b, std::uint64_t seed) { return {Family::Beta, a, b, seed}; }

void Generator::validate() const {
    const auto pos = [](double x) { return x > 0.0 && std::isfinite(x); };
    switch (family) {
        case Family::ExactGP:
            require(std::isfinite(p1) && pos(p2), "exact-gp needs a finite shape and a positive scale");
            break;
        case Family::Pareto:
        case Family::Frechet:
            require(pos(p1), std::string(family_name(family)) + " needs alpha > 0");
            break;
        case Family::Burr: require(pos(p1) && pos(p2), "burr needs c > 0 and k > 0"); break;
        case Family::Exponential: require(pos(p1), "exponential needs rate > 0"); break;
        case Family::Beta: require(pos(p1) && pos(p2), "beta needs a > 0 and b > 0"); break;
    }
}

double Generator::true_gamma() const {
    switch (family) {
        case Family::ExactGP: return p1;
        case Family::Pareto:
        case Family::Frechet: return 1.0 / p1;
        case Family::Burr: return 1.0 / (p1 * p2);
        case Family::Exponential: return 0.0;
        case Family::Beta: return -1.0 / p2;
    }
    return kNaN;
}

std::string Generator::describe() const {
    std::ostringstream os;
    os << family_name(family) << '(';
    switch (family) {
        case Family::ExactGP: os << "gamma=" << p1 << ", sigma=" << p2; break;
        case Family::Pareto:
        case Family::Frechet: os << "alpha=" << p1; break;
        case Family::Burr: os << "c=" << p1 << ", k=" << p2; break;
        case Family::Exponential: os << "rate=" << p1; break;
        case Family::Beta: os << "a=" << p1 << ", b=" << p2; break;
    }
    os << ')';
    return os.str();
}

double Generator::sf(double x) const {
    switch (family) {
        case Family::ExactGP: return gp_sf(GpParams(p1, p2), x);
        case Family::Pareto: return x <= 1.0 ? 1.0 : std::pow(x, -p1);
        case Family::Frechet: return x <= 0.0 ? 1.0 : -std::expm1(-std::pow(x, -p1));
        case Family::Burr: return x <= 0.0 ? 1.0 : std::exp(-p2 * std::log1p(std::pow(x, p1)));
        case Family::Exponential: return x <= 0.0 ? 1.0 : std::exp(-p1 * x);
        case Family::Beta:
            if (x <= 0.0) return 1.0;
            if (x >= 1.0) return 0.0;
            return boost::math::cdf(boost::math::complement(boost::math::beta_distribution<>(p1, p2), x));
    }
    return kNaN;
}

double Generator::cdf(double x) const {
    switch (family) {
        case Family::ExactGP: return gp_cdf(GpParams(p1, p2), x);
        case Family::Frechet: return x <= 0.0 ? 0.0 : std::exp(-std::pow(x, -p1));
        case Family::Beta:
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return boost::math::cdf(boost::math::beta_distribution<>(p1, p2), x);
        default: return 1.0 - sf(x);
    }
}

double Generator::upper_quantile(double v) const {
    if (!(v > 0.0 && v <= 1.0)) throw DomainError("upper quantile needs v in (0, 1]");
    switch (family) {
        case Family::ExactGP: return gp_upper_quantile(GpParams(p1, p2), v);
        case Family::Pareto: return std::pow(v, -1.0 / p1);
        case Family::Frechet: return v == 1.0 ? 0.0 : std::pow(-std::log1p(-v), -1.0 / p1);
        case Family::Burr: return std::pow(std::expm1(-std::log(v) / p2), 1.0 / p1);
        case Family::Exponential: return -std::log(v) / p1;
        case Family::Beta:
            return v == 1.0 ? 0.0
                            : boost::math::quantile(
                                  boost::math::complement(boost::math::beta_distribution<>(p1, p2), v));
    }
    return kNaN;
}

double Generator::tail_mean(double tau) const {
    if (!(tau >= 0.0 && tau < 1.0)) throw DomainError("tail mean needs tau in [0, 1)");
    if (true_gamma() >= 1.0) throw InfiniteMomentError("tail mean is infinite for shape >= 1");
    const double v = 1.0 - tau;
    const double q = upper_quantile(v);
    switch (family) {
        case Family::ExactGP: return q + gp_mean(gp_above(q));
        case Family::Pareto: return p1 / (p1 - 1.0) * q;
        case Family::Exponential: return q + 1.0 / p1;
        default: break;
    }
    const double hi = family == Family::Beta ? 1.0 : kInf;
    const QuadratureResult r = integrate([this](double x) { return sf(x); }, q, hi, 1e-12 * std::max(1.0, q) * v);
    return q + r.value / v;
}

GpParams Generator::gp_above(double t) const {
    if (family != Family::ExactGP) throw DomainError("threshold stability applies to exact-gp generators only");
    return GpParams(p1, p2 + p1 * t);
}

Generator Generator::with_seed(std::uint64_t s) const {
    Generator g = *this;
    g.seed = s;
    return g;
}

double Generator::draw(Rng& rng) const { return upper_quantile(uniform_open(rng)); }

double Generator::draw_above(double tau, Rng& rng) const {
    if (!(tau >= 0.0 && tau < 1.0)) throw DomainError("conditional draw needs tau in [0, 1)");
    return upper_quantile((1.0 - tau) * uniform_open(rng));
}

std::vector<double> generate_raw(const Generator& g, std::size_t n) {
    g.validate();
    if (n < 1) throw DomainError("sample size must be at least 1");
    Rng rng(splitmix64(g.seed));
    std::vector<double> x(n);
    for (double& v : x) v = g.draw(rng);
    return x;
}

SortedSample generate(const Generator& g, std::size_t n) { return SortedSample(generate_raw(g, n)); }

KRule KRule::fixed_k(std::size_t k) { return {true, k, 0.5, 0.0, 1.0}; }
KRule KRule::power(double delta, double eta, double multiplier) { return {false, 0, delta, eta, multiplier}; }

std::size_t KRule::operator()(std::size_t n) const {
    if (fixed) return k;
    const double x = static_cast<double>(n);
    const double v = multiplier * std::pow(x, delta) * std::pow(std::log(x), eta);
    return static_cast<std::size_t>(std::floor(v * (1.0 + 1e-12)));
}

std::string KRule::describe() const {
    std::ostringstream os;
    if (fixed)
        os << "k=" << k;
    else
        os << "k=floor(" << (multiplier != 1.0 ? std::to_string(multiplier) + " " : std::string()) << "n^" << delta << (eta != 0.0 ? " log^" + std::to_string(eta) + " n" : std::string()) << ")";
    return os.str();
}

double ExperimentConfig::effective_tau_star() const {
    if (!c) return tau_star;
    const double g = generator.true_gamma();
    if (!(g < 0.0)) throw RuleInapplicableError("endpoint-gap rule needs a negative true shape");
    if (!(*c >= 1.0)) throw DomainError("scaling factor c must be >= 1");
    return std::pow(*c, 1.0 / g);
}

void ExperimentConfig::validate() const {
    generator.validate();
    require(replications >= kMinReplications, "experiments need at least 50 replications");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(!methods.empty(), "at least one method is required");
    const double ts = effective_tau_star();
    require(ts > 0.0 && ts <= 1.0, "tau_star must lie in (0, 1]");
    for (double t : tau_star_ladder) require(t > 0.0 && t <= 1.0, "tau_star ladder values must lie in (0, 1]");
    if (generator.pwm_only())
        for (Method m : methods)
            require(m == Method::PWM, "generators with true shape <= -1/2 are reserved for PWM-only runs");
    for (std::size_t n : ladder_of(*this)) {
        const std::size_t k = k_rule(n);
        std::ostringstream os;
        os << "k=" << k << " is infeasible for n=" << n;
        require(k >= 10 && k < n, os.str());
        require(ts * static_cast<double>(k) / static_cast<double>(n) > 1e-15, "extreme level rounds to 1");
    }
    require(relative_tolerance > 0.0, "relative tolerance must be positive");
}

const char* status_name(RepStatus s) noexcept {
    switch (s) {
        case RepStatus::Ok: return "ok";
        case RepStatus::Fallback: return "fallback";
        case RepStatus::Failed: return "failed";
    }
    return "unknown";
}

const ArmCoverage& CoverageResult::arm(const std::string& name) const {
    for (const auto& a : arms)
        if (a.arm == name) return a;
    throw DomainError("no arm named " + name);
}

const TsArm& TsCoverageResult::arm(const std::string& name) const {
    for (const auto& a : arms)
        if (a.arm == name) return a;
    throw DomainError("no arm named " + name);
}

namespace {

std::vector<ArmCoverage> aggregate_coverage(const std::vector<CoverageRow>& rows, const std::vector<std::string>& names) {
    std::vector<ArmCoverage> out;
    for (const std::string& name : names) {
        ArmCoverage a;
        a.arm = name;
        double cov = 0.0, mass = 0.0, width = 0.0;
        for (const CoverageRow& r : rows) {
            if (r.arm != name) continue;
            if (r.status == RepStatus::Failed) {
                ++a.failures;
                continue;
            }
            if (r.status == RepStatus::Fallback) ++a.fallbacks;
            ++a.used;
            cov += r.covered ? 1.0 : 0.0;
            mass += r.true_mass;
            width += r.upper - r.lower;
        }
        if (a.used > 0) {
            const double u = static_cast<double>(a.used);
            a.coverage = cov / u;
            a.se = std::sqrt(a.coverage * (1.0 - a.coverage) / u);
            a.mean_true_mass = mass / u;
            a.mean_width = width / u;
        }
        out.push_back(a);
    }
    return out;
}

}  // namespace

CoverageResult coverage_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Generator& gen = cfg.generator;
    const std::size_t n = cfg.n;
    const std::size_t k = cfg.k_rule(n);
    const double ts = cfg.effective_tau_star();
    const LevelPair lp = LevelPair::from_ratio(1.0 - static_cast<double>(k) / static_cast<double>(n), ts);
    const double tau_e = lp.tau_e();
    const double v_e = ts * (1.0 - lp.tau_i());
    const double t_e = gen.upper_quantile(v_e);
    const auto true_mass = [&](double lo, double hi) {
        if (hi < t_e) return 0.0;
        return clamp01((gen.sf(std::max(lo, t_e)) - gen.sf(hi)) / v_e);
    };

    std::vector<std::string> names{"oracle"};
    for (Method m : cfg.methods) names.push_back(arm_name(m));
    std::vector<std::vector<CoverageRow>> per_rep(cfg.replications);

    parallel_for(cfg.replications, [&](std::size_t r) {
        const SortedSample s = generate(replicate_generator(gen, cfg.seed, n, r), n);
        Rng test_rng = make_rng(derive_seed(cfg.seed, kTestStream, n), 0, r);
        const double y = gen.draw_above(tau_e, test_rng);
        auto& rows = per_rep[r];

        CoverageRow oracle;
        oracle.replication = r;
        oracle.arm = "oracle";
        oracle.test_point = y;
        oracle.lower = gen.upper_quantile(v_e * (1.0 - 0.5 * cfg.alpha));
        oracle.upper = gen.upper_quantile(v_e * 0.5 * cfg.alpha);
        oracle.covered = oracle.lower <= y && y <= oracle.upper;
        oracle.true_mass = true_mass(oracle.lower, oracle.upper);
        rows.push_back(oracle);

        const ExceedanceSet e = select_exceedances(s, k);
        for (Method m : cfg.methods) {
            CoverageRow row;
            row.replication = r;
            row.arm = arm_name(m);
            row.test_point = y;
            ArmModel am = fit_arm(e, m, sampler_for(cfg.sampler, cfg.seed, n, r), 0);
            row.status = am.status;
            row.error = am.error;
            if (am.model) {
                try {
                    const PredictiveInterval pi = predictive_interval(am.model->with_levels(lp), cfg.alpha);
                    row.lower = pi.lower;
                    row.upper = pi.upper;
                    row.covered = pi.lower <= y && y <= pi.upper;
                    row.true_mass = true_mass(pi.lower, pi.upper);
                } catch (const Error& err) {
                    row.status = RepStatus::Failed;
                    row.error = err.what();
                }
            }
            rows.push_back(row);
        }
    });

    CoverageResult res;
    res.n = n;
    res.k = k;
    res.tau_star = ts;
    res.tau_e = tau_e;
    res.alpha = cfg.alpha;
    res.replications = cfg.replications;
    for (auto& rows : per_rep) res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    res.arms = aggregate_coverage(res.rows, names);
    return res;
}

std::vector<ContractionRow> contraction_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Generator& gen = cfg.generator;
    if (gen.family != Family::ExactGP) throw DomainError("contraction experiments need an exact-gp generator");
    const std::vector<double> stars =
        cfg.tau_star_ladder.empty() ? std::vector<double>{cfg.effective_tau_star()} : cfg.tau_star_ladder;
    std::vector<std::string> names{"oracle"};
    for (Method m : cfg.methods) names.push_back(arm_name(m));
    const std::size_t arms = names.size();

    std::vector<ContractionRow> out;
    for (std::size_t n : ladder_of(cfg)) {
        const std::size_t k = cfg.k_rule(n);
        // dist[r][star * arms + arm]; NaN marks a failure
        std::vector<std::vector<double>> dist(cfg.replications, std::vector<double>(stars.size() * arms, kNaN));
        parallel_for(cfg.replications, [&](std::size_t r) {
            const SortedSample s = generate(nested_generator(gen, cfg.seed, r), n);
            const ExceedanceSet e = select_exceedances(s, k);
            std::vector<std::optional<PredictiveModel>> models;
            const double t_i = gen.upper_quantile(1.0 - e.tau_i);
            models.emplace_back(PredictiveModel::frequentist(gen.gp_above(t_i), t_i, LevelPair::intermediate(e.tau_i)));
            for (Method m : cfg.methods)
                models.push_back(fit_arm(e, m, sampler_for(cfg.sampler, cfg.seed, n, r), cfg.mixture_draws).model);
            for (std::size_t si = 0; si < stars.size(); ++si) {
                const LevelPair lp = LevelPair::from_ratio(e.tau_i, stars[si]);
                const double t_e = gen.upper_quantile(stars[si] * (1.0 - e.tau_i));
                const GpParams truth = gen.gp_above(t_e);
                const Support ts = support(truth);
                const Density f_true = [&](double y) { return gp_pdf(truth, y - t_e); };
                for (std::size_t a = 0; a < arms; ++a) {
                    if (!models[a]) continue;
                    try {
                        const PredictiveModel m = models[a]->with_levels(lp);
                        const Support ms = m.support();
                        std::vector<double> bp = m.kinks();
                        bp.push_back(t_e);
                        if (ts.bounded()) bp.push_back(t_e + ts.upper);
                        const Support joint{std::min(ms.lower, t_e),
                                            std::max(ms.upper, ts.bounded() ? t_e + ts.upper : kInf)};
                        dist[r][si * arms + a] =
                            hellinger([&](double y) { return m.pdf(y); }, f_true, joint, bp);
                    } catch (const Error&) {
                    }
                }
            }
        });
        for (std::size_t si = 0; si < stars.size(); ++si) {
            for (std::size_t a = 0; a < arms; ++a) {
                ContractionRow row;
                row.n = n;
                row.k = k;
                row.tau_star = stars[si];
                row.arm = names[a];
                std::vector<double> d;
                for (const auto& rep : dist) {
                    const double v = rep[si * arms + a];
                    if (std::isnan(v))
                        ++row.failures;
                    else
                        d.push_back(v);
                }
                row.used = d.size();
                if (!d.empty()) {
                    std::sort(d.begin(), d.end());
                    row.median = quantile_type7(d, 0.5);
                    row.lower_quartile = quantile_type7(d, 0.25);
                    row.upper_quartile = quantile_type7(d, 0.75);
                }
                out.push_back(row);
            }
        }
    }
    return out;
}

std::vector<TailRow> tail_equivalence_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Generator& gen = cfg.generator;
    const double ts = cfg.effective_tau_star();
    std::vector<std::string> names{"oracle"};
    for (Method m : cfg.methods) names.push_back(arm_name(m));
    const std::size_t arms = names.size();

    std::vector<TailRow> out;
    for (std::size_t n : ladder_of(cfg)) {
        const std::size_t k = cfg.k_rule(n);
        std::vector<std::vector<double>> ratio(cfg.replications, std::vector<double>(arms, kNaN));
        parallel_for(cfg.replications, [&](std::size_t r) {
            const SortedSample s = generate(nested_generator(gen, cfg.seed, r), n);
            const ExceedanceSet e = select_exceedances(s, k);
            const double v_i = 1.0 - e.tau_i;
            const double q = gen.upper_quantile(ts * v_i);
            ratio[r][0] = gen.sf(q) / gen.sf(gen.upper_quantile(v_i)) / ts;
            for (std::size_t a = 1; a < arms; ++a) {
                const ArmModel am = fit_arm(e, cfg.methods[a - 1], sampler_for(cfg.sampler, cfg.seed, n, r), 0);
                if (!am.model) continue;
                try {
                    ratio[r][a] = tail_equivalence_ratio(*am.model, q, ts);
                } catch (const Error&) {
                }
            }
        });
        for (std::size_t a = 0; a < arms; ++a) {
            TailRow row;
            row.n = n;
            row.k = k;
            row.tau_star = ts;
            row.arm = names[a];
            std::vector<double> d;
            for (const auto& rep : ratio) {
                if (std::isnan(rep[a]))
                    ++row.failures;
                else
                    d.push_back(rep[a]);
            }
            row.used = d.size();
            if (!d.empty()) {
                std::sort(d.begin(), d.end());
                row.median = quantile_type7(d, 0.5);
                row.band_lower = quantile_type7(d, 0.05);
                row.band_upper = quantile_type7(d, 0.95);
            }
            out.push_back(row);
        }
    }
    return out;
}

std::vector<RiskRow> risk_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Generator& gen = cfg.generator;
    const double ts = cfg.effective_tau_star();
    std::vector<std::string> names{"oracle"};
    for (Method m : cfg.methods) names.push_back(arm_name(m));
    const std::size_t arms = names.size();

    std::vector<RiskRow> out;
    for (std::size_t n : ladder_of(cfg)) {
        const std::size_t k = cfg.k_rule(n);
        const double v_e = ts * static_cast<double>(k) / static_cast<double>(n);
        const double true_var = gen.upper_quantile(v_e);
        const double true_es = gen.true_gamma() < 1.0 ? gen.tail_mean(1.0 - v_e) : kInf;
        // err[r][2a] = VaR relative error, err[r][2a+1] = ES relative error
        std::vector<std::vector<double>> err(cfg.replications, std::vector<double>(2 * arms, kNaN));
        parallel_for(cfg.replications, [&](std::size_t r) {
            const SortedSample s = generate(replicate_generator(gen, cfg.seed, n, r), n);
            const ExceedanceSet e = select_exceedances(s, k);
            const LevelPair lp = LevelPair::from_ratio(e.tau_i, ts);
            err[r][0] = 0.0;
            if (std::isfinite(true_es)) err[r][1] = 0.0;
            for (std::size_t a = 1; a < arms; ++a) {
                const ArmModel am = fit_arm(e, cfg.methods[a - 1], sampler_for(cfg.sampler, cfg.seed, n, r), 0);
                if (!am.model) continue;
                try {
                    err[r][2 * a] = std::fabs(var_from_predictive(*am.model, ts) / true_var - 1.0);
                } catch (const Error&) {
                    continue;
                }
                if (!std::isfinite(true_es)) continue;
                try {
                    err[r][2 * a + 1] = std::fabs(es_point_forecast(*am.model, lp) / true_es - 1.0);
                } catch (const Error&) {
                }
            }
        });
        for (std::size_t a = 0; a < arms; ++a) {
            RiskRow row;
            row.n = n;
            row.k = k;
            row.tau_e = 1.0 - v_e;
            row.arm = names[a];
            row.true_var = true_var;
            row.true_es = true_es;
            std::vector<double> ve, ee;
            for (const auto& rep : err) {
                if (std::isnan(rep[2 * a])) {
                    ++row.failures;
                    continue;
                }
                ve.push_back(rep[2 * a]);
                if (!std::isnan(rep[2 * a + 1])) ee.push_back(rep[2 * a + 1]);
            }
            row.used = ve.size();
            row.es_used = ee.size();
            const auto within = [&](const std::vector<double>& x) {
                return static_cast<double>(std::count_if(x.begin(), x.end(),
                                                         [&](double v) { return v < cfg.relative_tolerance; })) /
                       static_cast<double>(x.size());
            };
            if (!ve.empty()) {
                std::sort(ve.begin(), ve.end());
                row.median_var_error = quantile_type7(ve, 0.5);
                row.var_within = within(ve);
            }
            if (!ee.empty()) {
                std::sort(ee.begin(), ee.end());
                row.median_es_error = quantile_type7(ee, 0.5);
                row.es_within = within(ee);
            } else {
                row.median_es_error = kNaN;
                row.es_within = kNaN;
            }
            out.push_back(row);
        }
    }
    return out;
}

void TsCoverageConfig::validate() const {
    innovations.validate();
    require(std::fabs(phi) < 1.0, "AR coefficient must satisfy |phi| < 1");
    require(window > 10 && k >= 10 && k < window - 1, "k must lie in [10, window - 1)");
    require(origins >= kMinReplications, "at least 50 origins are required");
    require(stride >= 1, "stride must be at least 1");
    require(tau_e > 1.0 - static_cast<double>(k) / static_cast<double>(window - 1) && tau_e < 1.0,
            "tau_e must lie above the residual intermediate level");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(!methods.empty(), "at least one method is required");
}

TsCoverageResult ts_coverage_experiment(const TsCoverageConfig& cfg) {
    cfg.validate();
    const Generator& innov = cfg.innovations;
    const std::size_t len = kSeriesBurnIn + cfg.window + (cfg.origins - 1) * cfg.stride;
    std::vector<double> y(len);
    {
        Rng rng = make_rng(cfg.seed, kSeriesStream, 0);
        double prev = 0.0;
        for (double& v : y) {
            v = cfg.phi * prev + innov.draw(rng);
            prev = v;
        }
    }
    const double v_e = 1.0 - cfg.tau_e;
    const double o_lo = innov.upper_quantile(v_e * (1.0 - 0.5 * cfg.alpha));
    const double o_hi = innov.upper_quantile(v_e * 0.5 * cfg.alpha);

    std::vector<std::string> names{"oracle"};
    for (Method m : cfg.methods) names.push_back(arm_name(m));
    std::vector<std::vector<CoverageRow>> per_origin(cfg.origins);

    parallel_for(cfg.origins, [&](std::size_t j) {
        const std::span<const double> w(y.data() + kSeriesBurnIn + j * cfg.stride, cfg.window);
        Rng test_rng = make_rng(cfg.seed, kTestStream, j);
        const double target = cfg.phi * w.back() + innov.draw_above(cfg.tau_e, test_rng);
        auto& rows = per_origin[j];
        CoverageRow oracle;
        oracle.replication = j;
        oracle.arm = "oracle";
        oracle.test_point = target;
        oracle.lower = cfg.phi * w.back() + o_lo;
        oracle.upper = cfg.phi * w.back() + o_hi;
        oracle.covered = oracle.lower <= target && target <= oracle.upper;
        oracle.true_mass = 1.0 - cfg.alpha;
        rows.push_back(oracle);

        std::optional<ResidualSeries> rs;
        std::string filter_error;
        try {
            rs = residual_pipeline(w, fit_ar(w, 1));
        } catch (const Error& err) {
            filter_error = err.what();
        }
        for (Method m : cfg.methods) {
            CoverageRow row;
            row.replication = j;
            row.arm = arm_name(m);
            row.test_point = target;
            if (!rs) {
                row.status = RepStatus::Failed;
                row.error = filter_error;
                rows.push_back(row);
                continue;
            }
            SamplerConfig sc = cfg.sampler;
            sc.seed = derive_seed(cfg.seed, kSamplerStream, j);
            const ExceedanceSet e = select_exceedances(SortedSample(rs->residuals), cfg.k);
            ArmModel am = fit_arm(e, m, sc, 0);
            row.status = am.status;
            row.error = am.error;
            if (am.model) {
                try {
                    const ConditionalPredictive cp(am.model->with_levels(LevelPair(e.tau_i, cfg.tau_e)), rs->mu_next,
                                                   rs->xi_next);
                    const PredictiveInterval pi = cp.interval(cfg.alpha);
                    row.lower = pi.lower;
                    row.upper = pi.upper;
                    row.covered = pi.lower <= target && target <= pi.upper;
                    const double q = innov.upper_quantile(v_e);
                    const double lo = std::max(pi.lower - cfg.phi * w.back(), q);
                    const double hi = std::max(pi.upper - cfg.phi * w.back(), q);
                    row.true_mass = (innov.sf(lo) - innov.sf(hi)) / v_e;
                } catch (const Error& err) {
                    row.status = RepStatus::Failed;
                    row.error = err.what();
                }
            }
            rows.push_back(row);
        }
    });

    TsCoverageResult res;
    for (auto& rows : per_origin) res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    for (const ArmCoverage& a : aggregate_coverage(res.rows, names)) {
        TsArm t;
        t.arm = a.arm;
        t.used = a.used;
        t.failures = a.failures;
        t.violation_rate = a.used > 0 ? 1.0 - a.coverage : 0.0;
        t.se = a.se;
        t.mean_true_mass = a.mean_true_mass;
        res.arms.push_back(t);
    }
    return res;
}

void write_coverage_csv(std::ostream& os, std::span<const CoverageRow> rows) {
    os << "replication,arm,status,lower,upper,test_point,covered,true_mass,error\n" << std::setprecision(17);
    for (const CoverageRow& r : rows)
        os << r.replication << ',' << r.arm << ',' << status_name(r.status) << ',' << r.lower << ',' << r.upper << ','
           << r.test_point << ',' << (r.covered ? 1 : 0) << ',' << r.true_mass << ',' << csv_quote(r.error) << '\n';
}

void write_contraction_csv(std::ostream& os, std::span<const ContractionRow> rows) {
    os << "n,k,tau_star,arm,median,lower_quartile,upper_quartile,used,failures\n" << std::setprecision(17);
    for (const ContractionRow& r : rows)
        os << r.n << ',' << r.k << ',' << r.tau_star << ',' << r.arm << ',' << r.median << ',' << r.lower_quartile << ','
           << r.upper_quartile << ',' << r.used << ',' << r.failures << '\n';
}

void write_tail_csv(std::ostream& os, std::span<const TailRow> rows) {
    os << "n,k,tau_star,arm,median,band_lower,band_upper,used,failures\n" << std::setprecision(17);
    for (const TailRow& r : rows)
        os << r.n << ',' << r.k << ',' << r.tau_star << ',' << r.arm << ',' << r.median << ',' << r.band_lower << ','
           << r.band_upper << ',' << r.used << ',' << r.failures << '\n';
}

void write_risk_csv(std::ostream& os, std::span<const RiskRow> rows) {
    os << "n,k,tau_e,arm,true_var,true_es,median_var_error,median_es_error,var_within,es_within,used,es_used,failures\n"
       << std::setprecision(17);
    for (const RiskRow& r : rows)
        os << r.n << ',' << r.k << ',' << r.tau_e << ',' << r.arm << ',' << r.true_var << ',' << r.true_es << ','
           << r.median_var_error << ',' << r.median_es_error << ',' << r.var_within << ',' << r.es_within << ','
           << r.used << ',' << r.es_used << ',' << r.failures << '\n';
}

}  // namespace potpred
