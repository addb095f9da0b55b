// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...] [--documented=ids]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "potpred/errors.hpp"
#include "potpred/estimation.hpp"
#include "potpred/gp.hpp"
#include "potpred/predict.hpp"
#include "potpred/quadrature.hpp"
#include "potpred/random.hpp"
#include "potpred/risk.hpp"
#include "potpred/simlab.hpp"
#include "support/oracles.hpp"

using namespace potpred;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [miss: " << what << "]";
        }
    }
};

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<void(Outcome&)> run;
};

// Table 1 arithmetic from the published fits.
void table_one(Outcome& out) {
    struct Fit {
        const char* name;
        GpParams p;
        double tau_e[3];
        double thr[3];
        double endpoint;
    };
    const Fit fits[] = {{"ML", GpParams(-0.34, 1.65), {0.99293, 0.99784, 0.99907}, {36.4, 37.2, 37.6}, 38.84},
                        {"PWM", GpParams(-0.29, 1.59), {0.99503, 0.99877, 0.99954}, {36.7, 37.6, 38.1}, 39.46}};
    const double tau_i = 0.9462;
    const double t = 34.0;
    double worst_pp = 0.0;
    for (const Fit& f : fits) {
        for (int i = 0; i < 3; ++i) {
            const double c = 2.0 + i;
            const LevelPair lp = extreme_level_from_c(f.p.gamma(), tau_i, c);
            const double d = std::fabs(lp.tau_e() - f.tau_e[i]);
            worst_pp = std::max(worst_pp, 100.0 * d);
            out.check(100.0 * d <= 1e-3, std::string(f.name) + " tau_e c=" + std::to_string(c));
            const double thr = predictive_affine(f.p, t, lp).location;
            out.check(std::fabs(thr - f.thr[i]) <= 0.1, std::string(f.name) + " threshold c=" + std::to_string(c));
            const double implied = std::log(c) / std::log((1.0 - f.tau_e[i]) / (1.0 - tau_i));
            out.detail << ' ' << f.name << " c=" << c << ": tau_e=" << 100.0 * lp.tau_e() << "% t_E=" << thr
                       << " (printed tau_e implies gamma=" << implied << ");";
        }
        const double ep = t - f.p.sigma() / f.p.gamma();
        out.check(std::fabs(ep - f.endpoint) <= 0.05, std::string(f.name) + " endpoint");
        out.detail << ' ' << f.name << " endpoint=" << ep << ';';
    }
    out.detail << " max tau_e gap=" << worst_pp << " pp";
}

// ML/PWM accuracy on exact GP excesses and the sqrt(k) rate of ML.
void consistency(Outcome& out) {
    const std::size_t n = 100000;
    const std::size_t reps = 20;
    const auto sample = [](double g, std::size_t size, std::uint64_t stream, std::size_t r) {
        Rng rng = make_rng(2024, stream, r);
        std::vector<double> x(size);
        for (double& v : x) v = oracle::gp_quantile(g, 1.0, uniform_open(rng));
        return x;
    };
    const auto fit = [](std::vector<double> x, Method m) {
        const ExceedanceSet e = ExceedanceSet::from_excesses(std::move(x), 0.0, 10 * x.size());
        return m == Method::ML ? fit_ml(e) : fit_pwm(e);
    };
    for (double g : {-0.25, 0.0, 0.5}) {
        const auto stream = static_cast<std::uint64_t>(1000 * (g + 1.0));
        for (Method m : {Method::ML, Method::PWM}) {
            double worst_g = 0.0, worst_s = 0.0;
            std::size_t outside = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                const GpFit f = fit(sample(g, n, stream, r), m);
                const double dg = std::fabs(f.params.gamma() - g);
                const double ds = std::fabs(f.params.sigma() - 1.0);
                worst_g = std::max(worst_g, dg);
                worst_s = std::max(worst_s, ds);
                outside += (dg > 0.02 || ds > 0.04) ? 1 : 0;
            }
            const std::string tag = std::string(method_name(m)) + " gamma=" + std::to_string(g);
            out.check(worst_g <= 0.02, tag + " gamma accuracy");
            out.check(worst_s <= 0.04, tag + " sigma accuracy");
            out.detail << ' ' << method_name(m) << "(g=" << g << "): max|dg|=" << worst_g << " max|ds|=" << worst_s
                       << " outside=" << outside << '/' << reps << ';';
        }
        double se_small = 0.0, se_large = 0.0;
        const std::size_t rate_reps = 200;
        for (std::size_t r = 0; r < rate_reps; ++r) {
            se_small += std::pow(fit(sample(g, 500, stream + 1, r), Method::ML).params.gamma() - g, 2);
            se_large += std::pow(fit(sample(g, 2000, stream + 2, r), Method::ML).params.gamma() - g, 2);
        }
        const double ratio = std::sqrt(se_small / se_large);
        out.check(ratio >= 1.6 && ratio <= 2.4, "ML RMSE ratio gamma=" + std::to_string(g));
        out.detail << " ml rmse(k=500)/rmse(k=2000) at g=" << g << ": " << ratio << ';';
    }
}

// Conditional coverage of ML and Bayesian intervals.
void coverage(Outcome& out) {
    ExperimentConfig cfg;
    cfg.generator = Generator::exact_gp(0.25, 1.0);
    cfg.n = 10000;
    cfg.k_rule = KRule::fixed_k(500);
    cfg.tau_star = 0.25;
    cfg.alpha = 0.05;
    cfg.replications = 500;
    cfg.methods = {Method::ML, Method::Bayes};
    cfg.sampler = SamplerConfig{1, 2000, 4000, 1};
    cfg.seed = 3;
    const CoverageResult r = coverage_experiment(cfg);
    for (const ArmCoverage& a : r.arms) {
        out.detail << ' ' << a.arm << ": coverage=" << a.coverage << " (se " << a.se << ", true-law mass "
                   << a.mean_true_mass << ", used " << a.used << ", fallbacks " << a.fallbacks << ");";
    }
    const ArmCoverage& o = r.arm("oracle");
    out.check(std::fabs(o.coverage - 0.95) <= 2.0 * std::sqrt(0.95 * 0.05 / static_cast<double>(o.used)),
              "oracle within 2 MC standard errors");
    for (const char* arm : {"ml", "bayes"}) {
        const ArmCoverage& a = r.arm(arm);
        out.check(a.coverage >= 0.93 && a.coverage <= 0.97, std::string(arm) + " coverage in [0.93, 0.97]");
    }
}

// Hellinger contraction along the n ladder.
void contraction(Outcome& out) {
    ExperimentConfig cfg;
    cfg.generator = Generator::exact_gp(0.25, 1.0);
    for (int j = 0; j <= 5; ++j)
        cfg.n_ladder.push_back(static_cast<std::size_t>(std::llround(2000.0 * std::pow(2.0, 4.0 * j / 5.0))));
    cfg.n = cfg.n_ladder.front();
    cfg.k_rule = KRule::power(0.5, 0.0, 4.0);
    cfg.tau_star = 0.25;
    cfg.replications = 300;
    cfg.methods = {Method::ML, Method::Bayes};
    cfg.sampler = SamplerConfig{1, 1000, 2000, 1};
    cfg.mixture_draws = 500;
    cfg.seed = 4;
    const auto rows = contraction_experiment(cfg);
    for (const char* arm : {"oracle", "ml", "bayes"}) {
        std::vector<double> med;
        out.detail << ' ' << arm << ':';
        for (const auto& r : rows) {
            if (r.arm != arm) continue;
            med.push_back(r.median);
            out.detail << " n=" << r.n << " k=" << r.k << " H=" << r.median;
            if (std::string(arm) != "oracle") out.check(r.failures == 0, std::string(arm) + " failures");
        }
        out.detail << ';';
        if (std::string(arm) == "oracle") {
            out.check(*std::max_element(med.begin(), med.end()) < 1e-6, "oracle distance ~ 0");
            continue;
        }
        int decreases = 0;
        for (std::size_t i = 1; i < med.size(); ++i) decreases += med[i] < med[i - 1] ? 1 : 0;
        out.check(decreases >= 4, std::string(arm) + " decreases in >= 4 of 5 steps");
    }
}

// Tail-equivalence ratio for Pareto(2).
void tail_equivalence(Outcome& out) {
    ExperimentConfig cfg;
    cfg.generator = Generator::pareto(2.0);
    cfg.n = 100000;
    cfg.n_ladder = {100000, 200000};
    cfg.k_rule = KRule::power(0.6);
    cfg.tau_star = 0.1;
    cfg.replications = 200;
    cfg.methods = {Method::ML, Method::Bayes};
    cfg.sampler = SamplerConfig{1, 1000, 2000, 1};
    cfg.seed = 5;
    const auto rows = tail_equivalence_experiment(cfg);
    for (const auto& r : rows)
        out.detail << ' ' << r.arm << " n=" << r.n << " k=" << r.k << ": median=" << r.median << " band=["
                   << r.band_lower << ", " << r.band_upper << "];";
    for (const char* arm : {"ml", "bayes"}) {
        const TailRow* small = nullptr;
        const TailRow* big = nullptr;
        for (const auto& r : rows) {
            if (r.arm != arm) continue;
            (r.n == 100000 ? small : big) = &r;
        }
        out.check(small->k == 1000, "k = 1000 at n = 1e5");
        out.check(small->median >= 0.9 && small->median <= 1.1, std::string(arm) + " median in [0.9, 1.1]");
        out.check(big->band_width() < small->band_width(), std::string(arm) + " band shrinks");
    }
}

// VaR/ES relative errors and the exact VaR identity.
void risk(Outcome& out) {
    ExperimentConfig cfg;
    cfg.generator = Generator::pareto(2.0);
    cfg.n = 100000;
    cfg.k_rule = KRule::fixed_k(1000);
    cfg.tau_star = 0.1;
    cfg.replications = 200;
    cfg.methods = {Method::ML, Method::PWM};
    cfg.seed = 6;
    const auto rows = risk_experiment(cfg);
    for (const auto& r : rows) {
        out.detail << ' ' << r.arm << ": VaR=" << r.true_var << " ES=" << r.true_es << " within15%: VaR "
                   << r.var_within << " ES " << r.es_within << " (median rel err " << r.median_var_error << ", "
                   << r.median_es_error << ");";
        if (r.arm == "oracle") continue;
        out.check(r.var_within >= 0.9, r.arm + " VaR within 15% in >= 90%");
        out.check(r.es_within >= 0.9, r.arm + " ES within 15% in >= 90%");
    }

    double worst = 0.0;
    const ExceedanceSet e = ExceedanceSet::from_excesses({1.0, 2.0}, 10.0, 40);
    for (double g : {-0.45, -0.3, -0.1, -1e-9, 0.0, 1e-9, 0.2, 0.5, 1.0, 2.0}) {
        for (double s : {0.1, 1.0, 7.5}) {
            for (double ts : {1.0, 0.7, 0.25, 0.1, 0.01, 1e-3, 1e-5}) {
                GpFit f;
                f.params = GpParams(g, s);
                f.threshold = e.threshold;
                const PredictiveModel m = freq_predictive(f, LevelPair::intermediate(e.tau_i));
                const double tau_e = LevelPair::from_ratio(e.tau_i, ts).tau_e();
                const double a = var_from_predictive(m, LevelPair(e.tau_i, tau_e).tau_star());
                const double b = extreme_var(f, e, tau_e);
                worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(b)));
            }
        }
    }
    out.check(worst <= 1e-10, "var_from_predictive == extreme_var");
    out.detail << " identity max rel gap=" << worst;
}

// Rolling-origin coverage on AR(1) with Pareto(2) innovations.
void ts_coverage(Outcome& out) {
    TsCoverageConfig cfg;
    cfg.innovations = Generator::pareto(2.0);
    cfg.phi = 0.6;
    cfg.origins = 500;
    cfg.alpha = 0.05;
    cfg.window = 10000;
    cfg.stride = 10000;
    cfg.k = 500;
    cfg.tau_e = 0.9875;
    cfg.methods = {Method::ML};
    cfg.seed = 7;
    const TsCoverageResult r = ts_coverage_experiment(cfg);
    for (const TsArm& a : r.arms)
        out.detail << ' ' << a.arm << ": violation=" << a.violation_rate << " (se " << a.se << ", true-law mass "
                   << a.mean_true_mass << ", used " << a.used << ");";
    const TsArm& ml = r.arm("ml");
    out.check(ml.failures == 0, "no failed origins");
    out.check(ml.violation_rate >= 0.02 && ml.violation_rate <= 0.08, "violation rate in [2%, 8%]");
}

// Numerical properties of the GP and predictive laws.
void numerics(Outcome& out) {
    double rt = 0.0, norm = 0.0, fd = 0.0, cont = 0.0;
    bool semigroup = true;
    const LevelPair lp = LevelPair::from_ratio(0.95, 0.2);
    for (double g : {-0.45, -0.25, -1e-9, 0.0, 0.2, 0.5, 1.0, 2.0}) {
        const GpParams p(g, 1.5);
        for (int i = 1; i < 1000; ++i) {
            const double u = i / 1000.0;
            rt = std::max(rt, std::fabs(gp_cdf(p, gp_quantile(p, u)) - u));
            rt = std::max(rt, std::fabs(predictive_cdf(p, 3.0, lp, predictive_quantile(p, 3.0, lp, u)) - u));
        }
        const Support s = predictive_support(p, 3.0, lp);
        const auto f = [&](double y) { return predictive_pdf(p, 3.0, lp, y); };
        norm = std::max(norm, std::fabs(oracle::integrate(f, s.lower, s.upper) - 1.0));
        for (int i = 1; i < 100; ++i) {
            const double y = predictive_quantile(p, 3.0, lp, i / 100.0);
            const double h = 1e-5 * std::max(1.0, std::fabs(y));
            const double d = (predictive_cdf(p, 3.0, lp, y + h) - predictive_cdf(p, 3.0, lp, y - h)) / (2.0 * h);
            fd = std::max(fd, std::fabs(d - f(y)));
        }
    }
    // Dyadic arguments keep every intermediate sum exact.
    for (double g : {-0.25, 0.0, 0.5, 1.5})
        for (double a : {0.5, 1.25, 2.0})
            for (double b : {0.25, 0.75, 1.0})
                semigroup = semigroup && threshold_shift(threshold_shift(GpParams(g, 4.0), a), b) ==
                                             threshold_shift(GpParams(g, 4.0), a + b);
    for (double x : {0.0, 0.1, 1.0, 5.0, 20.0}) {
        for (double eps : {2e-8, -2e-8}) {
            cont = std::max(cont, std::fabs(gp_cdf(GpParams(eps, 1.0), x) - gp_cdf(GpParams(0.0, 1.0), x)));
            cont = std::max(cont, std::fabs(gp_pdf(GpParams(eps, 1.0), x) - gp_pdf(GpParams(0.0, 1.0), x)));
        }
    }
    for (double u : {0.01, 0.5, 0.99})
        for (double eps : {2e-8, -2e-8})
            cont = std::max(cont, std::fabs(gp_quantile(GpParams(eps, 1.0), u) - gp_quantile(GpParams(0.0, 1.0), u)));
    const GpParams e1(0.0, 1.0), e4(0.0, 4.0);
    const double h = hellinger([&](double x) { return gp_pdf(e1, x); }, [&](double x) { return gp_pdf(e4, x); },
                               support(e1));
    out.check(rt <= 1e-10, "cdf/quantile round trip");
    out.check(norm <= 1e-8, "density normalization");
    out.check(fd <= 1e-6, "pdf vs finite-differenced cdf");
    out.check(semigroup, "threshold-stability semigroup");
    out.check(cont <= 1e-6, "gamma -> 0 continuity");
    out.check(std::fabs(h - 0.44721) <= 1e-5 && std::fabs(h - std::sqrt(0.2)) <= 1e-6, "Hellinger closed form");
    out.detail << " round trip=" << rt << " normalization=" << norm << " fd=" << fd << " continuity=" << cont
               << " hellinger=" << h;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "Table 1 arithmetic", 1.0, table_one},
        {2, "estimator consistency", 60.0, consistency},
        {3, "predictive-interval coverage", 1200.0, coverage},
        {4, "Hellinger contraction", 1800.0, contraction},
        {5, "tail equivalence", 600.0, tail_equivalence},
        {6, "risk forecasts", 0.0, risk},
        {7, "time-series coverage", 900.0, ts_coverage},
        {8, "numerical properties", 10.0, numerics},
    };
    // --documented=1,2 lists criteria whose failure is recorded as unattainable; they still print FAIL.
    std::set<int> only, documented;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const std::string flag = "--documented=";
        if (arg.rfind(flag, 0) == 0) {
            std::istringstream ids(arg.substr(flag.size()));
            for (std::string id; std::getline(ids, id, ',');) documented.insert(std::atoi(id.c_str()));
        } else {
            only.insert(std::atoi(arg.c_str()));
        }
    }

    int failed = 0;
    for (const Criterion& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& ex) {
            out.pass = false;
            out.detail << " [exception: " << ex.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_seconds > 0.0) out.check(secs < c.budget_seconds, "runtime budget");
        const bool excused = !out.pass && documented.count(c.id);
        failed += (out.pass || excused) ? 0 : 1;
        std::printf("CRITERION %d %s: %s (%.1f s)%s\n", c.id, c.title,
                    out.pass ? "PASS" : (excused ? "FAIL (documented)" : "FAIL"), secs, out.detail.str().c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
