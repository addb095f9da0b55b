#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "potpred/bayes.hpp"
#include "potpred/errors.hpp"
#include "potpred/random.hpp"
#include "support/oracles.hpp"

using namespace potpred;
using Catch::Approx;

namespace {

ExceedanceSet exact_excesses(double g, double s, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(k);
    for (double& v : x) v = oracle::gp_quantile(g, s, uniform_open(rng));
    return ExceedanceSet::from_excesses(std::move(x), 0.0, 10 * k);
}

PriorSpec weak_prior(const ExceedanceSet& e) { return PriorSpec::default_for(e); }

}  // namespace

TEST_CASE("log prior arithmetic", "[bayes][prior]") {
    const PriorSpec lu(UniformWindowShape{-0.4, 0.8}, LogUniformScale{});
    CHECK(log_prior(lu, 0.1, 2.0) - log_prior(lu, 0.1, 5.0) == Approx(-std::log(2.0) + std::log(5.0)));
    CHECK(log_prior(lu, 0.1, 2.0) - log_prior(lu, 0.3, 2.0) == Approx(0.0).margin(1e-15));
    CHECK(log_prior(lu, -0.6, 2.0) == -kInf);
    CHECK(log_prior(lu, 0.9, 2.0) == -kInf);

    const PriorSpec tn(TruncatedNormalShape{}, LogUniformScale{});
    CHECK(log_prior(tn, -0.6, 1.0) == -kInf);
    CHECK(log_prior(tn, -0.5, 1.0) == -kInf);
    // Normalized truncated normal on (-1/2, inf).
    const boost::math::normal_distribution<double> n10(0.0, 10.0);
    const double z = 1.0 - boost::math::cdf(n10, -0.5);
    CHECK(tn.log_shape(0.3) == Approx(std::log(boost::math::pdf(n10, 0.3) / z)).epsilon(1e-12));

    const PriorSpec dd(TruncatedNormalShape{}, DataDependentScale{ScaleBase::Gamma, 2.0, 3.0, 2.0});
    const boost::math::gamma_distribution<double> base(2.0, 1.0 / 3.0);
    CHECK(std::exp(dd.log_scale(2.0)) == Approx(boost::math::pdf(base, 1.0) / 2.0).epsilon(1e-12));
    CHECK(std::exp(dd.log_scale(5.0)) == Approx(boost::math::pdf(base, 2.5) / 2.0).epsilon(1e-12));

    const PriorSpec ig(TruncatedNormalShape{}, DataDependentScale{ScaleBase::InverseGamma, 3.0, 2.0, 1.5});
    const double mass = oracle::integrate([&](double s) { return std::exp(ig.log_scale(s)); }, 0.0, kInf);
    CHECK(mass == Approx(1.0).epsilon(1e-8));
}

TEST_CASE("prior validity gate", "[bayes][prior]") {
    CHECK_THROWS_AS(PriorSpec(UniformWindowShape{-0.6, 0.5}, LogUniformScale{}), DomainError);
    CHECK_THROWS_AS(PriorSpec(UniformWindowShape{0.5, 0.5}, LogUniformScale{}), DomainError);
    CHECK_THROWS_AS(PriorSpec(TruncatedNormalShape{0.0, -1.0}, LogUniformScale{}), DomainError);
    CHECK_THROWS_AS(PriorSpec(TruncatedNormalShape{}, DataDependentScale{ScaleBase::Gamma, 1.0, 1.0, 0.0}),
                    DomainError);
    // Not integrable at -1/2.
    CHECK_THROWS_AS(PriorSpec(CustomShape{[](double g) { return -std::log(g + 0.5); }}, LogUniformScale{}),
                    DomainError);
    // Unbounded as gamma grows.
    CHECK_THROWS_AS(PriorSpec(CustomShape{[](double g) { return g; }}, LogUniformScale{}), DomainError);
    // Unbounded as gamma decreases to 0.
    CHECK_THROWS_AS(PriorSpec(CustomShape{[](double g) { return g > 0 ? -0.5 * std::log(g) : 0.0; }},
                              LogUniformScale{}),
                    DomainError);
    CHECK_NOTHROW(PriorSpec(CustomShape{[](double g) { return -g * g; }}, LogUniformScale{}));
    CHECK_NOTHROW(PriorSpec(CustomShape{[](double g) { return -0.5 * std::log(g + 0.5); }, 2.0}, LogUniformScale{}));
}

TEST_CASE("shape support gate for expected shortfall", "[bayes][prior]") {
    CHECK_FALSE(PriorSpec(TruncatedNormalShape{}, LogUniformScale{}).shape_support_below_one());
    CHECK(PriorSpec(TruncatedNormalShape{0.0, 1.0, 0.9}, LogUniformScale{}).shape_support_below_one());
    CHECK(PriorSpec(UniformWindowShape{-0.5, 0.99}, LogUniformScale{}).shape_support_below_one());
    CHECK_FALSE(PriorSpec(UniformWindowShape{-0.5, 1.0}, LogUniformScale{}).shape_support_below_one());
}

TEST_CASE("log posterior", "[bayes][posterior]") {
    const ExceedanceSet e = ExceedanceSet::from_excesses({0.5, 1.0, 4.0}, 0.0, 30);
    const PriorSpec spec(TruncatedNormalShape{}, LogUniformScale{});
    CHECK(log_posterior_unnorm(spec, e, GpParams(-0.3, 1.0)) == -kInf);  // 4 > 1/0.3
    const GpParams th(0.2, 1.3);
    CHECK(log_posterior_unnorm(spec, e, th) ==
          Approx(gp_loglik(th, e.excesses) + log_prior(spec, th)).epsilon(1e-14));

    const auto base = [](double g) { return -g * g; };
    const PriorSpec a(CustomShape{base}, LogUniformScale{});
    const PriorSpec b(CustomShape{[&](double g) { return base(g) + 3.25; }}, LogUniformScale{});
    CHECK(log_posterior_unnorm(b, e, th) - log_posterior_unnorm(a, e, th) == Approx(3.25).epsilon(1e-12));
}

TEST_CASE("flat-prior posterior mode agrees with the ML fit on a grid", "[bayes][posterior]") {
    const ExceedanceSet e = exact_excesses(0.2, 1.0, 1500, 31);
    const GpFit ml = fit_ml(e);
    const PriorSpec flat(UniformWindowShape{-0.49, 2.0}, DataDependentScale{ScaleBase::Gamma, 1.0, 1e-12, 1.0});
    const double g0 = ml.params.gamma();
    const double s0 = ml.params.sigma();
    const double dg = 0.4 / 199.0;
    const double ds = 0.4 * s0 / 199.0;
    double best = -kInf;
    double bg = 0.0;
    double bs = 0.0;
    for (int i = 0; i < 200; ++i) {
        for (int j = 0; j < 200; ++j) {
            const double g = g0 - 0.2 + dg * i;
            const double s = s0 * 0.8 + ds * j;
            const double v = log_posterior_unnorm(flat, e, GpParams(g, s));
            if (v > best) {
                best = v;
                bg = g;
                bs = s;
            }
        }
    }
    CHECK(std::fabs(bg - g0) <= dg);
    CHECK(std::fabs(bs - s0) <= ds);
}

TEST_CASE("posterior sampling recovers exact-model parameters", "[bayes][sampler]") {
    const ExceedanceSet e = exact_excesses(0.3, 1.0, 2000, 32);
    SamplerConfig cfg;
    cfg.seed = 77;
    const PosteriorSample ps = sample_posterior(weak_prior(e), e, cfg);
    REQUIRE(ps.size() == cfg.draws);
    const PosteriorSummary sm = posterior_summary(ps, 0.95);
    CHECK(std::fabs(sm.gamma.mean - 0.3) < 0.05);
    CHECK(std::fabs(sm.sigma.mean - 1.0) < 0.05);
    CHECK(ps.acceptance_rate > 0.1);
    CHECK(ps.acceptance_rate < 0.6);
    CHECK(ps.warnings.empty());
    CHECK(ps.ess.gamma > 1000.0);
    for (const GpParams& d : ps.draws()) {
        REQUIRE(GpParams::valid(d.gamma(), d.sigma()));
        REQUIRE(gp_loglik(d, e.excesses) > -kInf);
    }
}

TEST_CASE("sampler is deterministic given the seed", "[bayes][sampler]") {
    const ExceedanceSet e = exact_excesses(-0.2, 2.0, 300, 33);
    SamplerConfig cfg;
    cfg.seed = 5;
    cfg.burn_in = 1000;
    cfg.draws = 2000;
    const PosteriorSample a = sample_posterior(weak_prior(e), e, cfg);
    const PosteriorSample b = sample_posterior(weak_prior(e), e, cfg);
    REQUIRE(a.size() == b.size());
    CHECK(std::equal(a.draws().begin(), a.draws().end(), b.draws().begin()));
    cfg.seed = 6;
    const PosteriorSample c = sample_posterior(weak_prior(e), e, cfg);
    CHECK_FALSE(std::equal(a.draws().begin(), a.draws().end(), c.draws().begin()));
    for (const GpParams& d : a.draws()) REQUIRE(gp_loglik(d, e.excesses) > -kInf);
}

TEST_CASE("thinning keeps the requested number of draws", "[bayes][sampler]") {
    const ExceedanceSet e = exact_excesses(0.1, 1.0, 200, 34);
    SamplerConfig cfg;
    cfg.burn_in = 500;
    cfg.draws = 300;
    cfg.thin = 3;
    const PosteriorSample ps = sample_posterior(weak_prior(e), e, cfg);
    CHECK(ps.size() == 300);
    CHECK(ps.thin == 3);
}

TEST_CASE("misspecified prior window triggers a health warning", "[bayes][sampler]") {
    const ExceedanceSet e = exact_excesses(0.0, 1.0, 2000, 35);
    const PriorSpec spec(UniformWindowShape{0.4, 0.6}, LogUniformScale{});
    SamplerConfig cfg;
    cfg.burn_in = 2000;
    cfg.draws = 4000;
    const PosteriorSample ps = sample_posterior(spec, e, cfg);
    const PosteriorSummary sm = posterior_summary(ps, 0.95);
    CHECK(sm.gamma.mean < 0.45);
    CHECK_FALSE(ps.warnings.empty());
    for (const GpParams& d : ps.draws()) REQUIRE(d.gamma() > 0.4);
}

TEST_CASE("posterior summary", "[bayes][summary]") {
    std::vector<GpParams> same(200, GpParams(-0.2, 1.5));
    const PosteriorSummary c = posterior_summary(PosteriorSample::from_draws(same), 0.95, 10.0);
    CHECK(c.gamma.lower == -0.2);
    CHECK(c.gamma.upper == -0.2);
    CHECK(c.sigma.lower == 1.5);
    REQUIRE(c.endpoint.has_value());
    CHECK(c.endpoint->mean == Approx(17.5));
    CHECK(c.endpoint_finite_fraction == 1.0);

    std::mt19937_64 rng(41);
    std::normal_distribution<double> z;
    std::vector<GpParams> fake;
    for (int i = 0; i < 100000; ++i) fake.emplace_back(10.0 + z(rng), std::exp(z(rng)));
    const PosteriorSummary f = posterior_summary(PosteriorSample::from_draws(fake), 0.9);
    const double z95 = 1.6448536269514722;
    CHECK(std::fabs(f.gamma.lower - (10.0 - z95)) < 0.02);
    CHECK(std::fabs(f.gamma.upper - (10.0 + z95)) < 0.02);
    CHECK(std::fabs(f.gamma.mean - 10.0) < 0.02);
    CHECK(std::fabs(std::log(f.sigma.lower) + z95) < 0.02);

    CHECK_THROWS_AS(posterior_summary(PosteriorSample::from_draws(std::vector<GpParams>(99, GpParams(0, 1))), 0.95),
                    DomainError);
}

TEST_CASE("type-7 quantiles and effective sample size", "[bayes][summary]") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile_type7(v, 0.0) == 1.0);
    CHECK(quantile_type7(v, 1.0) == 4.0);
    CHECK(quantile_type7(v, 0.5) == 2.5);
    CHECK(quantile_type7(v, 0.25) == Approx(1.75));

    std::mt19937_64 rng(42);
    std::normal_distribution<double> z;
    std::vector<double> iid(20000);
    for (double& x : iid) x = z(rng);
    CHECK(effective_sample_size(iid) == Approx(20000).epsilon(0.1));
    std::vector<double> ar(20000);
    double prev = 0.0;
    for (double& x : ar) prev = x = 0.9 * prev + z(rng);
    CHECK(effective_sample_size(ar) == Approx(20000.0 * 0.1 / 1.9).epsilon(0.25));
}

TEST_CASE("credible intervals contract as k grows", "[bayes][property][slow]") {
    SamplerConfig cfg;
    cfg.burn_in = 2000;
    cfg.draws = 4000;
    int narrower = 0;
    for (int r = 0; r < 50; ++r) {
        const ExceedanceSet small = exact_excesses(0.2, 1.0, 500, derive_seed(36, 1, r));
        const ExceedanceSet large = exact_excesses(0.2, 1.0, 2000, derive_seed(36, 2, r));
        cfg.seed = derive_seed(36, 3, r);
        const auto ws = posterior_summary(sample_posterior(weak_prior(small), small, cfg), 0.95).gamma;
        const auto wl = posterior_summary(sample_posterior(weak_prior(large), large, cfg), 0.95).gamma;
        if (wl.upper - wl.lower < ws.upper - ws.lower) ++narrower;
    }
    CHECK(narrower >= 45);
}

TEST_CASE("credible intervals are calibrated on exact GP data", "[bayes][property][slow]") {
    SamplerConfig cfg;
    cfg.burn_in = 2000;
    cfg.draws = 4000;
    int covered = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        const ExceedanceSet e = exact_excesses(0.2, 1.0, 500, derive_seed(37, 1, r));
        cfg.seed = derive_seed(37, 2, r);
        const auto g = posterior_summary(sample_posterior(weak_prior(e), e, cfg), 0.95).gamma;
        if (g.lower <= 0.2 && 0.2 <= g.upper) ++covered;
    }
    const double rate = static_cast<double>(covered) / reps;
    INFO("coverage " << rate);
    CHECK(rate >= 0.93);
    CHECK(rate <= 0.97);
}
