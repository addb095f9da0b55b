#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "potpred/bayes.hpp"
#include "potpred/estimation.hpp"
#include "potpred/gp.hpp"
#include "potpred/random.hpp"

namespace potpred {

enum class Family { ExactGP, Pareto, Frechet, Burr, Exponential, Beta };

const char* family_name(Family f) noexcept;
Family parse_family(const std::string& name);

/**
 * @brief Seeded inverse-cdf sampler for a tail family.
 *
 * Parameters by family: ExactGP (gamma, sigma), Pareto (alpha), Frechet
 * (alpha), Burr XII (c, k), Exponential (rate), Beta (a, b).
 */
struct Generator {
    Family family = Family::ExactGP;
    double p1 = 0.0;
    double p2 = 1.0;
    std::uint64_t seed = 1;

    static Generator exact_gp(double gamma, double sigma, std::uint64_t seed = 1);
    static Generator pareto(double alpha, std::uint64_t seed = 1);
    static Generator frechet(double alpha, std::uint64_t seed = 1);
    static Generator burr(double c, double k, std::uint64_t seed = 1);
    static Generator exponential(double rate, std::uint64_t seed = 1);
    static Generator beta(double a, double b, std::uint64_t seed = 1);

    /// Throws DomainError on invalid parameters.
    void validate() const;

    /// Extreme-value index of the family's domain of attraction.
    double true_gamma() const;

    /// True shape is at or below -1/2, where only PWM applies.
    bool pwm_only() const { return true_gamma() <= -0.5; }

    std::string describe() const;

    double cdf(double x) const;
    double sf(double x) const;

    /// Level exceeded with probability v in (0, 1].
    double upper_quantile(double v) const;

    double quantile(double p) const { return upper_quantile(1.0 - p); }

    /// E[X | X > quantile(tau)].
    double tail_mean(double tau) const;

    /// Conditional tail at the exact threshold t = quantile(tau) for exact-GP data: GP(gamma, sigma + gamma t).
    GpParams gp_above(double t) const;

    Generator with_seed(std::uint64_t s) const;

    double draw(Rng& rng) const;

    /// Draw conditional on exceeding quantile(tau), by inverse-cdf truncation.
    double draw_above(double tau, Rng& rng) const;
};

/// n draws in generation order (deterministic given the seed).
std::vector<double> generate_raw(const Generator& g, std::size_t n);

SortedSample generate(const Generator& g, std::size_t n);

/// k as a function of n: fixed, or floor(multiplier n^delta log^eta n).
struct KRule {
    bool fixed = false;
    std::size_t k = 0;
    double delta = 0.5;
    double eta = 0.0;
    double multiplier = 1.0;

    static KRule fixed_k(std::size_t k);
    static KRule power(double delta, double eta = 0.0, double multiplier = 1.0);

    std::size_t operator()(std::size_t n) const;
    std::string describe() const;
};

struct ExperimentConfig {
    Generator generator;
    std::size_t n = 10000;
    KRule k_rule;
    double tau_star = 0.25;
    std::optional<double> c;  // endpoint-gap rule on the true shape instead of tau_star
    double alpha = 0.05;
    std::size_t replications = 500;
    std::vector<Method> methods{Method::ML};
    std::uint64_t seed = 1;
    SamplerConfig sampler{1, 2000, 2000, 1};
    std::size_t mixture_draws = 500;       // posterior draws kept for mixture densities
    std::vector<std::size_t> n_ladder;     // contraction and tail-equivalence runs; empty = {n}
    std::vector<double> tau_star_ladder;   // contraction sweep; empty = {tau_star}
    double relative_tolerance = 0.15;      // risk experiment

    /// Throws DomainError when counts, levels or methods are infeasible.
    void validate() const;

    double effective_tau_star() const;
};

enum class RepStatus { Ok, Fallback, Failed };

const char* status_name(RepStatus s) noexcept;

struct CoverageRow {
    std::size_t replication = 0;
    std::string arm;
    RepStatus status = RepStatus::Ok;
    double lower = 0.0;
    double upper = 0.0;
    double test_point = 0.0;
    bool covered = false;
    double true_mass = 0.0;  // true conditional probability of [lower, upper]
    std::string error;
};

struct ArmCoverage {
    std::string arm;
    std::size_t used = 0;
    std::size_t failures = 0;
    std::size_t fallbacks = 0;
    double coverage = 0.0;
    double se = 0.0;
    double mean_true_mass = 0.0;
    double mean_width = 0.0;
};

struct CoverageResult {
    std::size_t n = 0;
    std::size_t k = 0;
    double tau_star = 0.0;
    double tau_e = 0.0;
    double alpha = 0.0;
    std::size_t replications = 0;
    std::vector<ArmCoverage> arms;  // "oracle" first, then the configured methods
    std::vector<CoverageRow> rows;

    const ArmCoverage& arm(const std::string& name) const;
};

/**
 * @brief Conditional coverage of predictive intervals.
 *
 * Each replication draws n points, builds each arm's interval at
 * (tau_i = 1 - k/n, tau_e = 1 - tau_star k/n) and checks it against one
 * test point drawn above the true quantile at tau_e. All arms share the
 * sample and the test point. ML failures fall back to PWM and are flagged.
 */
CoverageResult coverage_experiment(const ExperimentConfig& cfg);

struct ContractionRow {
    std::size_t n = 0;
    std::size_t k = 0;
    double tau_star = 0.0;
    std::string arm;
    double median = 0.0;
    double lower_quartile = 0.0;
    double upper_quartile = 0.0;
    std::size_t used = 0;
    std::size_t failures = 0;
};

/**
 * Median Hellinger distance to the true predictive density per (n, tau_star, arm). Exact-GP generators only.
 * Samples are nested along the n ladder: replication r at a larger n extends the draws used at a smaller n.
 */
std::vector<ContractionRow> contraction_experiment(const ExperimentConfig& cfg);

struct TailRow {
    std::size_t n = 0;
    std::size_t k = 0;
    double tau_star = 0.0;
    std::string arm;
    double median = 0.0;
    double band_lower = 0.0;  // 5% quantile
    double band_upper = 0.0;  // 95% quantile
    std::size_t used = 0;
    std::size_t failures = 0;

    double band_width() const { return band_upper - band_lower; }
};

/// Distribution of the tail-equivalence ratio per (n, arm); samples are nested along the n ladder.
std::vector<TailRow> tail_equivalence_experiment(const ExperimentConfig& cfg);

struct RiskRow {
    std::size_t n = 0;
    std::size_t k = 0;
    double tau_e = 0.0;
    std::string arm;
    double true_var = 0.0;
    double true_es = 0.0;
    double median_var_error = 0.0;  // relative
    double median_es_error = 0.0;
    double var_within = 0.0;  // fraction of replications within the relative tolerance
    double es_within = 0.0;
    std::size_t used = 0;
    std::size_t es_used = 0;
    std::size_t failures = 0;
};

/// Relative error of VaR and ES point forecasts against closed-form values, per arm.
std::vector<RiskRow> risk_experiment(const ExperimentConfig& cfg);

struct TsCoverageConfig {
    Generator innovations = Generator::pareto(2.0);
    double phi = 0.6;
    std::size_t window = 10000;
    std::size_t stride = 10000;  // distance between origins; stride = window gives disjoint windows
    std::size_t origins = 500;
    std::size_t k = 500;
    double tau_e = 0.9875;       // tau_star = 1/4
    double alpha = 0.05;
    std::vector<Method> methods{Method::ML};
    std::uint64_t seed = 1;
    SamplerConfig sampler{1, 2000, 2000, 1};

    void validate() const;
};

struct TsArm {
    std::string arm;
    std::size_t used = 0;
    std::size_t failures = 0;
    double violation_rate = 0.0;
    double se = 0.0;
    double mean_true_mass = 0.0;  // true conditional probability of the intervals
};

struct TsCoverageResult {
    std::vector<TsArm> arms;  // "oracle" first
    std::vector<CoverageRow> rows;

    const TsArm& arm(const std::string& name) const;
};

/**
 * @brief Rolling-origin coverage of conditional intervals on an AR(1) series.
 *
 * Origin j fits an AR(1) filter to observations [j s, j s + window) for
 * stride s and checks the interval at tau_e against phi Y_last + e*, where
 * e* is an innovation drawn above its true tau_e quantile.
 */
TsCoverageResult ts_coverage_experiment(const TsCoverageConfig& cfg);

void write_coverage_csv(std::ostream& os, std::span<const CoverageRow> rows);
void write_contraction_csv(std::ostream& os, std::span<const ContractionRow> rows);
void write_tail_csv(std::ostream& os, std::span<const TailRow> rows);
void write_risk_csv(std::ostream& os, std::span<const RiskRow> rows);

}  // namespace potpred
