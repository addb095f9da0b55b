#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "potpred/errors.hpp"
#include "potpred/predict.hpp"
#include "potpred/random.hpp"
#include "support/oracles.hpp"

using namespace potpred;
using Catch::Approx;

namespace {

const GpParams kMilanMl(-0.34, 1.65);
const GpParams kMilanPwm(-0.29, 1.59);
constexpr double kMilanTauI = 1.0 - 169.0 / 3140.0;

ExceedanceSet exact_excesses(double g, double s, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(k);
    for (double& v : x) v = oracle::gp_quantile(g, s, uniform_open(rng));
    return ExceedanceSet::from_excesses(std::move(x), 3.0, 20 * k);
}

PosteriorSample small_posterior(double g, std::uint64_t seed) {
    const ExceedanceSet e = exact_excesses(g, 1.0, 400, seed);
    SamplerConfig cfg;
    cfg.seed = seed;
    cfg.burn_in = 2000;
    cfg.draws = 2000;
    return sample_posterior(PriorSpec::default_for(e), e, cfg);
}

}  // namespace

TEST_CASE("intermediate-level intervals from the published temperature fits", "[predict]") {
    const LevelPair lp = LevelPair::intermediate(kMilanTauI);
    const PredictiveInterval ml = predictive_interval(PredictiveModel::frequentist(kMilanMl, 34.0, lp), 0.05);
    CHECK(std::fabs(ml.lower - 34.1) < 0.1);
    CHECK(std::fabs(ml.upper - 37.5) < 0.1);
    const PredictiveInterval pwm = predictive_interval(PredictiveModel::frequentist(kMilanPwm, 34.0, lp), 0.05);
    CHECK(std::fabs(pwm.lower - 34.1) < 0.1);
    CHECK(std::fabs(pwm.upper - 37.6) < 0.1);
}

TEST_CASE("frequentist model at tau_star = 1 is the excess law", "[predict]") {
    GpFit fit;
    fit.params = GpParams(0.2, 1.5);
    fit.threshold = 7.0;
    const PredictiveModel m = freq_predictive(fit, LevelPair::intermediate(0.9));
    for (double y = 6.0; y < 20.0; y += 0.5) CHECK(m.cdf(y) == gp_cdf(fit.params, y - 7.0));
}

TEST_CASE("frequentist quantiles agree with Monte Carlo of the affine form", "[predict]") {
    const GpParams p(0.3, 2.0);
    const LevelPair lp = LevelPair::from_ratio(0.95, 0.2);
    const PredictiveModel m = PredictiveModel::frequentist(p, 10.0, lp);
    Rng rng(51);
    std::vector<double> y(1000000);
    const double sc = std::pow(0.2, -0.3);
    for (double& v : y) v = 10.0 + 2.0 * (sc - 1.0) / 0.3 + sc * oracle::gp_quantile(0.3, 2.0, uniform_open(rng));
    std::sort(y.begin(), y.end());
    double worst = 0.0;
    for (int i = 1; i < 100; ++i) {
        const double prob = i / 100.0;
        const double emp = y[static_cast<std::size_t>(prob * y.size())];
        worst = std::max(worst, std::fabs(m.cdf(emp) - prob));
    }
    CHECK(worst < 3e-3);
}

TEST_CASE("exponential interval in closed form", "[predict]") {
    const PredictiveModel m = PredictiveModel::frequentist(GpParams(0.0, 1.0), 0.0, LevelPair::intermediate(0.9));
    const PredictiveInterval pi = predictive_interval(m, 0.05);
    CHECK(pi.lower == Approx(-std::log(0.975)).epsilon(1e-12));
    CHECK(pi.upper == Approx(-std::log(0.025)).epsilon(1e-12));
    CHECK(pi.lower == Approx(0.02532).margin(1e-5));
    CHECK(pi.upper == Approx(3.6889).margin(1e-4));
    CHECK(std::fabs(pi.mass - 0.95) < 1e-8);
    CHECK_THROWS_AS(predictive_interval(m, 0.0), DomainError);
    CHECK_THROWS_AS(predictive_interval(m, 1.0), DomainError);

    double prev = kInf;
    for (double a : {0.01, 0.1, 0.5, 0.9, 0.99, 0.999}) {
        const PredictiveInterval q = predictive_interval(m, a);
        CHECK(q.upper - q.lower < prev);
        prev = q.upper - q.lower;
    }
    CHECK(prev < 0.01);
    CHECK(predictive_interval(m, 0.999).lower == Approx(std::log(2.0)).margin(1e-3));
}

TEST_CASE("collapsed posterior reproduces the frequentist model", "[predict][bayes]") {
    const GpParams th(-0.2, 1.3);
    const PosteriorSample ps = PosteriorSample::from_draws(std::vector<GpParams>(150, th));
    for (double ts : {1.0, 0.3, 0.05}) {
        const LevelPair lp = LevelPair::from_ratio(0.9, ts);
        const PredictiveModel b = bayes_predictive(ps, 5.0, lp);
        const PredictiveModel f = PredictiveModel::frequentist(th, 5.0, lp);
        for (double y = 4.0; y < 12.0; y += 0.13) {
            CHECK(std::fabs(b.cdf(y) - f.cdf(y)) < 1e-12);
            CHECK(std::fabs(b.pdf(y) - f.pdf(y)) < 1e-12);
        }
        CHECK(b.quantile(0.3) == Approx(f.quantile(0.3)).epsilon(1e-12));
        CHECK(b.mean() == Approx(f.mean()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(bayes_predictive(PosteriorSample::from_draws(std::vector<GpParams>(99, th)), 0.0,
                                     LevelPair::intermediate(0.9)),
                    DomainError);
}

TEST_CASE("mixture cdf is monotone and inverts consistently", "[predict][bayes][property]") {
    const PosteriorSample ps = small_posterior(-0.2, 52);
    for (double ts : {1.0, 0.25}) {
        const PredictiveModel m = bayes_predictive(ps, 3.0, LevelPair::from_ratio(0.95, ts));
        const Support s = m.support();
        REQUIRE(std::isfinite(s.upper));
        double prev = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double y = s.lower + (s.upper - s.lower) * i / 1000.0;
            const double c = m.cdf(y);
            if (i > 0 && i < 1000) CHECK(c > prev - 1e-12);
            CHECK(c >= prev);
            prev = c;
        }
        CHECK(m.cdf(s.lower - 1.0) == 0.0);
        CHECK(m.cdf(s.upper + 1.0) == 1.0);
        for (int i = 1; i <= 99; ++i) {
            const double p = i / 100.0;
            CHECK(std::fabs(m.cdf(m.quantile(p)) - p) < 1e-6);
        }
        const PredictiveInterval pi = predictive_interval(m, 0.05);
        CHECK(std::fabs(pi.mass - 0.95) < 1e-4);
    }
}

TEST_CASE("frequentist quantile/cdf consistency and interval mass", "[predict][property]") {
    for (double g : {-0.4, 0.0, 0.6}) {
        const PredictiveModel m = PredictiveModel::frequentist(GpParams(g, 1.2), 2.0, LevelPair::from_ratio(0.9, 0.1));
        for (int i = 1; i <= 99; ++i) CHECK(std::fabs(m.cdf(m.quantile(i / 100.0)) - i / 100.0) < 1e-6);
        CHECK(std::fabs(predictive_interval(m, 0.05).mass - 0.95) < 1e-8);
    }
}

TEST_CASE("heavy-tailed mixture quantiles", "[predict][bayes]") {
    const PosteriorSample ps = small_posterior(0.6, 53);
    const PredictiveModel m = bayes_predictive(ps, 3.0, LevelPair::from_ratio(0.95, 0.1));
    for (double p : {0.01, 0.5, 0.99}) CHECK(std::fabs(m.cdf(m.quantile(p)) - p) < 1e-6);
    CHECK(std::fabs(m.sf(m.upper_quantile(1e-4)) - 1e-4) < 1e-9);
}

TEST_CASE("endpoint-gap level rule", "[predict][levels]") {
    CHECK(extreme_level_from_c(-0.34, 0.9462, 2.0).tau_e() == Approx(0.99293).margin(1e-4));
    CHECK(extreme_level_from_c(-0.29, 0.9462, 2.0).tau_e() == Approx(0.99503).margin(1e-4));
    const LevelPair one = extreme_level_from_c(-0.3, 0.9, 1.0);
    CHECK(one.tau_star() == 1.0);
    CHECK(one.tau_e() == 0.9);
    CHECK_THROWS_AS(extreme_level_from_c(0.0, 0.9, 2.0), RuleInapplicableError);
    CHECK_THROWS_AS(extreme_level_from_c(0.2, 0.9, 2.0), RuleInapplicableError);
    CHECK_THROWS_AS(extreme_level_from_c(-0.2, 0.9, 0.5), DomainError);
    for (double g : {-0.45, -0.3, -0.1, -0.05}) {
        for (double c : {1.0, 1.5, 2.0, 3.0, 4.0}) {
            const LevelPair lp = extreme_level_from_c(g, 0.95, c);
            CHECK(std::fabs(std::pow(lp.tau_star(), g) - c) < 1e-12 * c);
        }
    }
}

TEST_CASE("return-period level rule", "[predict][levels]") {
    for (double T : {37.0, 100.0, 365.0, 1825.0}) {
        const ReturnPeriodLevels r = extreme_level_from_return_period(T, 3140);
        CHECK(r.levels.tau_star() == 0.25);
        CHECK(r.levels.tau_e() == Approx(1.0 - 1.0 / T).epsilon(1e-14));
    }
    CHECK(extreme_level_from_return_period(365.0, 3140).k_tilde == 34);  // 4*3140/365 = 34.41
    CHECK(extreme_level_from_return_period(37.0, 3140).k_tilde == 339);   // 339.46
    CHECK_THROWS_AS(extreme_level_from_return_period(6280.0, 3140), InfeasibleLevelError);
    CHECK_THROWS_AS(extreme_level_from_return_period(4.0, 3140), InfeasibleLevelError);
    CHECK_THROWS_AS(extreme_level_from_return_period(1.0, 3140), DomainError);
}

TEST_CASE("unconditional tail composition", "[predict]") {
    const GpParams p(0.25, 1.0);
    const PredictiveModel m = PredictiveModel::frequentist(p, 5.0, LevelPair::intermediate(0.9));
    CHECK(unconditional_tail_cdf(m, std::nextafter(5.0, 6.0)) == Approx(0.9).margin(1e-12));
    CHECK(unconditional_tail_cdf(m, 1e12) == Approx(1.0).margin(1e-6));
    CHECK_THROWS_AS(unconditional_tail_cdf(m, 5.0), DomainError);
    CHECK_THROWS_AS(unconditional_tail_cdf(m.with_levels(LevelPair::from_ratio(0.9, 0.5)), 6.0), DomainError);

    // True law: F(y) = 1 - 0.1 * sf_GP(y - 5) above 5; the composition equals it.
    for (double y : {5.5, 7.0, 20.0}) CHECK(unconditional_tail_cdf(m, y) == Approx(1.0 - 0.1 * gp_sf(p, y - 5.0)));
}

TEST_CASE("tail equivalence ratio", "[predict]") {
    const GpParams p(0.4, 1.0);
    const PredictiveModel m = PredictiveModel::frequentist(p, 0.0, LevelPair::intermediate(0.9));
    for (double ts : {0.5, 0.1, 0.01}) {
        const double q = gp_upper_quantile(p, ts);
        CHECK(tail_equivalence_ratio(m, q, ts) == Approx(1.0).epsilon(1e-12));
    }
    CHECK(tail_equivalence_ratio(m, 0.0, 1.0) == 1.0);
}

TEST_CASE("density grid export", "[predict]") {
    const PredictiveModel m = PredictiveModel::frequentist(GpParams(0.1, 1.0), 1.0, LevelPair::from_ratio(0.9, 0.5));
    const auto rows = density_grid(m, 0.0, 10.0, 101);
    REQUIRE(rows.size() == 101);
    CHECK(rows.front().y == 0.0);
    CHECK(rows.back().y == 10.0);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].cdf >= rows[i - 1].cdf);
    std::ostringstream os;
    write_grid_csv(os, rows);
    CHECK(os.str().rfind("y,pdf,cdf\n", 0) == 0);
    CHECK_THROWS_AS(density_grid(m, 1.0, 1.0, 10), DomainError);
}
