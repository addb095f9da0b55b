#include "potpred/timeseries.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "potpred/errors.hpp"
#include "potpred/optim.hpp"
#include "potpred/parallel.hpp"
#include "potpred/random.hpp"
#include "potpred/risk.hpp"

namespace potpred {

namespace {

constexpr std::size_t kGarchMinLength = 250;
constexpr double kCollapseRatio = 1e-6;
constexpr double kNonIdentifiedAlpha = 1e-3;
constexpr double kUnitRootWarning = 0.999;
constexpr std::uint64_t kRollingStream = 0x7453;

void require_finite(std::span<const double> x, const char* what) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) {
            std::ostringstream os;
            os << what << ": non-finite value at position " << i;
            throw DomainError(os.str());
        }
    }
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

struct GarchPoint {
    double mu, omega, alpha, beta;
};

// theta = (mu, log omega, b1, b2) with alpha = e^b1 / D, beta = e^b2 / D, D = 1 + e^b1 + e^b2.
GarchPoint unpack(std::span<const double> th) {
    const double m = std::max(th[2], th[3]);
    const double e1 = std::exp(th[2] - m);
    const double e2 = std::exp(th[3] - m);
    const double d = std::exp(-m) + e1 + e2;
    return {th[0], std::exp(th[1]), e1 / d, e2 / d};
}

std::vector<double> pack(double mu, double omega, double alpha, double beta) {
    const double rest = 1.0 - alpha - beta;
    return {mu, std::log(omega), std::log(alpha / rest), std::log(beta / rest)};
}

double garch_nll(std::span<const double> y, const GarchPoint& g, double h0) {
    double h = h0;
    double s = 0.0;
    for (double v : y) {
        if (!(h > 0.0) || !std::isfinite(h)) return kInf;
        const double e = v - g.mu;
        s += std::log(h) + e * e / h;
        h = g.omega + g.alpha * e * e + g.beta * h;
    }
    return std::isfinite(s) ? 0.5 * s / static_cast<double>(y.size()) : kInf;
}

double min_variance(std::span<const double> y, const GarchPoint& g, double h0) {
    double h = h0;
    double lo = h;
    for (double v : y) {
        const double e = v - g.mu;
        h = g.omega + g.alpha * e * e + g.beta * h;
        lo = std::min(lo, h);
    }
    return lo;
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

LocScaleModel fit_ar(std::span<const double> series, std::size_t p) {
    if (p < 1) throw DomainError("AR order must be at least 1");
    if (!(series.size() > 10 * p)) {
        std::ostringstream os;
        os << "AR(" << p << ") needs more than " << 10 * p << " observations, got " << series.size();
        throw DomainError(os.str());
    }
    require_finite(series, "fit_ar");
    const std::size_t rows = series.size() - p;
    Eigen::MatrixXd X(rows, p + 1);
    Eigen::VectorXd y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = r + p;
        X(r, 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) X(r, j + 1) = series[i - 1 - j];
        y(r) = series[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
        std::ostringstream os;
        os << "AR(" << p << ") design has rank " << qr.rank() << " < " << p + 1;
        throw RankDeficientError(os.str());
    }
    const Eigen::VectorXd b = qr.solve(y);
    ArFilter f;
    f.intercept = b(0);
    f.coefficients.assign(b.data() + 1, b.data() + b.size());
    for (double c : f.coefficients)
        if (!std::isfinite(c)) throw NumericError("AR coefficients are not finite");
    return {f, series.size()};
}

LocScaleModel fit_garch11(std::span<const double> series) {
    if (series.size() < kGarchMinLength) {
        std::ostringstream os;
        os << "GARCH(1,1) needs at least " << kGarchMinLength << " observations, got " << series.size();
        throw DomainError(os.str());
    }
    require_finite(series, "fit_garch11");
    const double m = mean_of(series);
    const double v = variance_of(series, m);
    if (!(v > 0.0)) throw DegenerateSampleError("GARCH(1,1) input has zero variance");
    const double sd = std::sqrt(v);
    std::vector<double> z(series.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (series[i] - m) / sd;

    const auto objective = optim::with_numeric_gradient(
        [&](std::span<const double> th) { return garch_nll(z, unpack(th), 1.0); });
    optim::BfgsOptions opts;
    opts.grad_tol = 1e-7;
    opts.max_iterations = 1000;

    optim::BfgsResult best;
    best.value = kInf;
    for (auto [a, b] : {std::pair{0.05, 0.90}, std::pair{0.10, 0.80}, std::pair{0.20, 0.50}}) {
        optim::BfgsResult r = optim::minimize_bfgs(objective, pack(0.0, 1.0 - a - b, a, b), opts);
        if (r.value < best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value)) throw ConvergenceError("GARCH(1,1) quasi-likelihood is infeasible at every start",
                                                            kNaN, kNaN);
    const GarchPoint g = unpack(best.x);
    if (min_variance(z, g, 1.0) < kCollapseRatio) {
        std::ostringstream os;
        os << "GARCH(1,1) variance recursion collapsed (omega=" << g.omega * v << ", alpha=" << g.alpha
           << ", beta=" << g.beta << ")";
        throw RecursionGuardError(os.str());
    }
    if (!best.converged && !(best.grad_norm < 1e-5)) {
        std::ostringstream os;
        os << "GARCH(1,1) fit did not converge: " << best.reason << " (gradient norm " << best.grad_norm << ")";
        throw ConvergenceError(os.str(), kNaN, kNaN);
    }
    Garch11Filter f;
    f.mean = m + sd * g.mu;
    f.omega = v * g.omega;
    f.alpha = g.alpha;
    f.beta = g.beta;
    f.initial_variance = v;
    f.non_identified = g.alpha < kNonIdentifiedAlpha;
    if (f.non_identified) f.warnings.emplace_back("alpha is near zero; beta is not identified");
    if (f.alpha + f.beta > kUnitRootWarning) f.warnings.emplace_back("alpha + beta is close to 1");
    return {f, series.size()};
}

ResidualSeries residual_pipeline(std::span<const double> series, const LocScaleModel& model) {
    require_finite(series, "residual_pipeline");
    ResidualSeries rs;
    if (model.is_ar()) {
        const ArFilter& f = model.ar();
        const std::size_t p = f.order();
        if (series.size() < p + 2) throw DomainError("series too short for the AR warm-up");
        const auto predict_at = [&](std::size_t i) {
            double mu = f.intercept;
            for (std::size_t j = 0; j < p; ++j) mu += f.coefficients[j] * series[i - 1 - j];
            return mu;
        };
        rs.skipped_prefix = p;
        for (std::size_t i = p; i < series.size(); ++i) {
            const double mu = predict_at(i);
            rs.residuals.push_back(series[i] - mu);
            rs.mu.push_back(mu);
            rs.xi.push_back(1.0);
        }
        rs.mu_next = predict_at(series.size());
        rs.xi_next = 1.0;
        return rs;
    }
    const Garch11Filter& f = model.garch();
    if (series.size() < kGarchWarmUp + 2) throw DomainError("series too short for the GARCH warm-up");
    double h = f.initial_variance;
    rs.skipped_prefix = kGarchWarmUp;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!(h > 0.0)) throw RecursionGuardError("GARCH variance recursion reached zero");
        const double xi = std::sqrt(h);
        const double e = series[i] - f.mean;
        if (i >= kGarchWarmUp) {
            rs.residuals.push_back(e / xi);
            rs.mu.push_back(f.mean);
            rs.xi.push_back(xi);
        }
        h = f.omega + f.alpha * e * e + f.beta * h;
    }
    if (!(h > 0.0)) throw RecursionGuardError("GARCH variance recursion reached zero");
    rs.mu_next = f.mean;
    rs.xi_next = std::sqrt(h);
    return rs;
}

ResidualSeries external_residuals(std::span<const double> series, std::span<const double> mu,
                                  std::span<const double> xi) {
    if (mu.size() != series.size() + 1 || xi.size() != series.size() + 1)
        throw DomainError("external filter needs one mu/xi entry per observation plus one for the next step");
    if (series.size() < 2) throw DomainError("external filter series is too short");
    require_finite(series, "external filter y");
    require_finite(mu, "external filter mu_hat");
    require_finite(xi, "external filter xi_hat");
    ResidualSeries rs;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (!(xi[i] > 0.0)) {
            std::ostringstream os;
            os << "external filter xi_hat must be positive (position " << i << ")";
            throw DomainError(os.str());
        }
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        rs.residuals.push_back((series[i] - mu[i]) / xi[i]);
        rs.mu.push_back(mu[i]);
        rs.xi.push_back(xi[i]);
    }
    rs.mu_next = mu.back();
    rs.xi_next = xi.back();
    return rs;
}

ConditionalPredictive::ConditionalPredictive(PredictiveModel residual, double mu, double xi)
    : residual_(std::move(residual)), mu_(mu), xi_(xi) {
    if (!(xi > 0.0) || !std::isfinite(xi) || !std::isfinite(mu))
        throw DomainError("conditional predictive needs finite mu and positive xi");
}

ConditionalPredictive ConditionalPredictive::with_levels(const LevelPair& levels) const {
    return {residual_.with_levels(levels), mu_, xi_};
}

double ConditionalPredictive::cdf(double y) const { return residual_.cdf((y - mu_) / xi_); }
double ConditionalPredictive::sf(double y) const { return residual_.sf((y - mu_) / xi_); }
double ConditionalPredictive::pdf(double y) const { return residual_.pdf((y - mu_) / xi_) / xi_; }
double ConditionalPredictive::quantile(double prob) const { return mu_ + xi_ * residual_.quantile(prob); }
double ConditionalPredictive::upper_quantile(double v) const { return mu_ + xi_ * residual_.upper_quantile(v); }
double ConditionalPredictive::mean() const { return mu_ + xi_ * residual_.mean(); }

PredictiveInterval ConditionalPredictive::interval(double alpha) const {
    PredictiveInterval pi = predictive_interval(residual_, alpha);
    pi.lower = mu_ + xi_ * pi.lower;
    pi.upper = mu_ + xi_ * pi.upper;
    return pi;
}

ConditionalPredictive conditional_predictive(const ResidualSeries& rs, std::size_t k, double tau_e, Method method,
                                             const SamplerConfig& cfg) {
    const ExceedanceSet e = select_exceedances(SortedSample(rs.residuals), k);
    if (!(tau_e >= e.tau_i && tau_e < 1.0)) {
        std::ostringstream os;
        os << "tau_e " << tau_e << " must lie in [tau_i, 1) with tau_i = " << e.tau_i;
        throw DomainError(os.str());
    }
    const PredictiveModel m = intermediate_model(e, method, cfg);
    return {m.with_levels(LevelPair(e.tau_i, tau_e)), rs.mu_next, rs.xi_next};
}

const char* filter_name(FilterKind f) noexcept {
    switch (f) {
        case FilterKind::AR: return "ar";
        case FilterKind::GARCH11: return "garch11";
        case FilterKind::External: return "external";
    }
    return "unknown";
}

FilterKind parse_filter(const std::string& name) {
    if (name == "ar") return FilterKind::AR;
    if (name == "garch11") return FilterKind::GARCH11;
    if (name == "external") return FilterKind::External;
    throw DomainError("unknown filter '" + name + "' (expected ar, garch11 or external)");
}

std::vector<ForecastRow> rolling_forecast(const SeriesInput& input, std::size_t window, std::size_t stride,
                                          const RollingConfig& cfg) {
    const std::size_t len = input.y.size();
    if (window < 2 || window > len) throw DomainError("window must lie in [2, series length]");
    if (stride < 1) throw DomainError("stride must be at least 1");
    const bool external = cfg.filter == FilterKind::External;
    if (external && (input.mu_hat.size() != len + 1 || input.xi_hat.size() != len + 1))
        throw DomainError("external filter needs mu_hat and xi_hat with one entry beyond the last observation");

    std::vector<std::size_t> origins;
    for (std::size_t j = 0; j + window <= len; j += stride) origins.push_back(j);
    std::vector<ForecastRow> rows(origins.size());

    parallel_for(origins.size(), [&](std::size_t r) {
        ForecastRow& row = rows[r];
        const std::size_t j = origins[r];
        row.origin = j;
        row.target = j + window;
        row.realized = row.target < len ? input.y[row.target] : kNaN;
        try {
            const std::span<const double> y(input.y.data() + j, window);
            ResidualSeries rs;
            switch (cfg.filter) {
                case FilterKind::AR: rs = residual_pipeline(y, fit_ar(y, cfg.ar_order)); break;
                case FilterKind::GARCH11: rs = residual_pipeline(y, fit_garch11(y)); break;
                case FilterKind::External:
                    rs = external_residuals(y, std::span<const double>(input.mu_hat.data() + j, window + 1),
                                            std::span<const double>(input.xi_hat.data() + j, window + 1));
                    break;
            }
            SamplerConfig sc = cfg.sampler;
            sc.seed = derive_seed(cfg.seed, kRollingStream, j);
            const ConditionalPredictive cp = conditional_predictive(rs, cfg.k, cfg.tau_e, cfg.method, sc);
            const LevelPair& lp = cp.residual().levels();
            row.mu_next = cp.mu();
            row.xi_next = cp.xi();
            row.tau_star = lp.tau_star();
            const PredictiveModel inter = cp.residual().with_levels(LevelPair::intermediate(lp.tau_i()));
            row.var = cp.mu() + cp.xi() * var_from_predictive(inter, lp.tau_star());
            const PredictiveInterval pi = cp.interval(cfg.alpha);
            row.lower = pi.lower;
            row.upper = pi.upper;
            if (std::isfinite(row.realized)) {
                row.exceeds_var = row.realized > row.var;
                row.outside_interval = row.exceeds_var && (row.realized < row.lower || row.realized > row.upper);
            }
        } catch (const Error& err) {
            row.error = err.what();
        }
    });
    return rows;
}

void write_forecast_csv(std::ostream& os, std::span<const ForecastRow> rows) {
    os << "origin,target,mu_next,xi_next,tau_star,var,lower,upper,realized,exceeds_var,outside_interval,error\n";
    os << std::setprecision(17);
    const auto num = [&](double v) -> std::ostream& {
        if (std::isfinite(v)) os << v;
        return os;
    };
    for (const ForecastRow& r : rows) {
        os << r.origin << ',' << r.target << ',';
        if (r.error.empty()) {
            num(r.mu_next) << ',';
            num(r.xi_next) << ',';
            num(r.tau_star) << ',';
            num(r.var) << ',';
            num(r.lower) << ',';
            num(r.upper) << ',';
        } else {
            os << ",,,,,,";
        }
        num(r.realized) << ',' << (r.exceeds_var ? 1 : 0) << ',' << (r.outside_interval ? 1 : 0) << ','
                        << csv_quote(r.error) << '\n';
    }
}

}  // namespace potpred
