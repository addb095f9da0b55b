#pragma once

#include <limits>

namespace potpred {

/// |gamma| below this switches every formula to its exponential limit.
inline constexpr double kGammaZeroTol = 1e-8;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/**
 * @brief Shape/scale pair of a generalized Pareto law.
 *
 * Valid parameters satisfy sigma > 0 and gamma > -1/2, the regime in which
 * the GP likelihood is regular. Construction throws DomainError otherwise;
 * use valid() to screen raw proposals without throwing.
 */
class GpParams {
public:
    GpParams(double gamma, double sigma);

    static bool valid(double gamma, double sigma) noexcept;

    double gamma() const noexcept { return gamma_; }
    double sigma() const noexcept { return sigma_; }

    friend bool operator==(const GpParams&, const GpParams&) = default;

private:
    double gamma_;
    double sigma_;
};

/// Interval [lower, upper) on which a density is positive; upper may be +inf.
struct Support {
    double lower = 0.0;
    double upper = kInf;

    bool bounded() const noexcept { return upper < kInf; }
};

/// Support of the excess law: (0, inf) for gamma >= 0, (0, -sigma/gamma) otherwise.
Support support(const GpParams& p) noexcept;

/**
 * @brief Intermediate level, extreme level and their tail-mass ratio.
 *
 * tau_star = (1 - tau_e) / (1 - tau_i) lies in (0, 1]. The ratio is stored
 * rather than recomputed so that rules which fix it (return periods, the
 * endpoint-gap rule) keep it bit-exact.
 */
class LevelPair {
public:
    LevelPair(double tau_i, double tau_e);

    static LevelPair intermediate(double tau_i);
    static LevelPair from_ratio(double tau_i, double tau_star);

    double tau_i() const noexcept { return tau_i_; }
    double tau_e() const noexcept { return tau_e_; }
    double tau_star() const noexcept { return tau_star_; }
    bool is_intermediate() const noexcept { return tau_star_ == 1.0; }

private:
    LevelPair(double tau_i, double tau_e, double tau_star);

    double tau_i_;
    double tau_e_;
    double tau_star_;
};

// Excess-scale GP law. Arguments outside the support clamp to 0/1 (cdf) or 0 (pdf).
double gp_cdf(const GpParams& p, double x) noexcept;
double gp_sf(const GpParams& p, double x) noexcept;
double gp_pdf(const GpParams& p, double x) noexcept;
double gp_logpdf(const GpParams& p, double x) noexcept;

/// Inverse cdf. prob == 1 returns the finite endpoint when gamma < 0.
double gp_quantile(const GpParams& p, double prob);

/// Quantile at upper-tail mass v, i.e. gp_quantile(p, 1 - v) without the cancellation.
double gp_upper_quantile(const GpParams& p, double v);

double gp_mean(const GpParams& p);

/// Law of Y - u given Y > u: GP(gamma, sigma + gamma u).
GpParams threshold_shift(const GpParams& p, double u);

/**
 * @brief Affine form of the extreme-level predictive law.
 *
 * A peak above the extreme threshold is distributed as
 * location + scale * U with U ~ GP(p), where
 * scale = tau_star^(-gamma) and location = t_i + sigma (scale - 1) / gamma.
 */
struct AffineLaw {
    double location;
    double scale;
};

AffineLaw predictive_affine(const GpParams& p, double t_i, const LevelPair& levels) noexcept;

double predictive_cdf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept;
double predictive_sf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept;
double predictive_pdf(const GpParams& p, double t_i, const LevelPair& levels, double y) noexcept;
double predictive_quantile(const GpParams& p, double t_i, const LevelPair& levels, double prob);
double predictive_mean(const GpParams& p, double t_i, const LevelPair& levels);
Support predictive_support(const GpParams& p, double t_i, const LevelPair& levels) noexcept;

/// Extrapolation weight: log x (gamma > 0), log^2 x (gamma = 0), x^-gamma (gamma < 0).
double w_gamma(double gamma, double x);

}  // namespace potpred
