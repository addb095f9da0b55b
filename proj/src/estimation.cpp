#include "potpred/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "potpred/errors.hpp"
#include "potpred/optim.hpp"

namespace potpred {

namespace {

constexpr double kSeriesTol = 1e-4;  // |gamma z| below which the log-likelihood uses its expansion
constexpr double kBoundaryGap = 1e-4;

void check_excess_count(const ExceedanceSet& e) {
    if (e.size() < 2) {
        std::ostringstream os;
        os << "at least 2 positive excesses required, got " << e.size();
        throw DomainError(os.str());
    }
}

// Mean negative log-likelihood in (gamma, eta = log sigma) with its gradient.
struct MlObjective {
    std::span<const double> x;

    double operator()(std::span<const double> th, std::span<double> grad) const {
        const double g = th[0];
        const double eta = th[1];
        if (!(g > -0.5) || !std::isfinite(eta)) return kInf;
        const double inv_sigma = std::exp(-eta);
        double ll = 0.0;
        double dg = 0.0;
        double deta = 0.0;
        for (double xi : x) {
            const double z = xi * inv_sigma;
            const double gz = g * z;
            if (gz <= -1.0) return kInf;
            if (std::fabs(gz) < kSeriesTol) {
                const double z2 = z * z;
                const double z3 = z2 * z;
                ll += -z - g * (z - 0.5 * z2) - g * g * (z3 / 3.0 - 0.5 * z2);
                dg += 0.5 * z2 - z + g * (z2 - 2.0 * z3 / 3.0);
            } else {
                const double l = std::log1p(gz);
                const double a = z / (1.0 + gz);
                ll += -(1.0 / g + 1.0) * l;
                dg += l / (g * g) - (1.0 / g + 1.0) * a;
            }
            deta += -1.0 + (1.0 + g) * z / (1.0 + gz);
        }
        const double m = static_cast<double>(x.size());
        ll = ll / m - eta;
        if (!grad.empty()) {
            grad[0] = -dg / m;
            grad[1] = -deta / m;
        }
        return std::isfinite(ll) ? -ll : kInf;
    }
};

std::vector<double> feasible_start(double g, double sigma, double max_excess) {
    g = std::max(g, -0.45);
    if (g < 0.0) sigma = std::max(sigma, -g * max_excess * 1.1);
    return {g, std::log(sigma)};
}

}  // namespace

SortedSample::SortedSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("sample is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            std::ostringstream os;
            os << "non-finite sample value at position " << i + 1;
            throw DomainError(os.str());
        }
    }
    std::sort(values_.begin(), values_.end());
}

ExceedanceSet ExceedanceSet::from_excesses(std::vector<double> excesses, double threshold, std::size_t n) {
    ExceedanceSet e;
    e.n = n;
    e.k = excesses.size();
    if (e.k < 1 || e.k >= n) throw DomainError("need 1 <= k < n");
    e.threshold = threshold;
    e.tau_i = 1.0 - static_cast<double>(e.k) / static_cast<double>(n);
    std::sort(excesses.begin(), excesses.end());
    for (double v : excesses) {
        if (!std::isfinite(v) || v < 0.0) throw DomainError("excesses must be finite and nonnegative");
    }
    const auto first_pos = std::find_if(excesses.begin(), excesses.end(), [](double v) { return v > 0.0; });
    e.dropped_ties = static_cast<std::size_t>(first_pos - excesses.begin());
    e.excesses.assign(first_pos, excesses.end());
    if (e.excesses.empty()) throw DegenerateSampleError("all excesses are zero");
    return e;
}

ExceedanceSet select_exceedances(const SortedSample& s, std::size_t k) {
    const std::size_t n = s.size();
    if (k < 1 || k >= n) {
        std::ostringstream os;
        os << "k=" << k << " outside [1, " << n - 1 << "] for a sample of size " << n;
        throw DomainError(os.str());
    }
    const double t = s[n - k - 1];
    std::vector<double> ex;
    ex.reserve(k);
    for (std::size_t i = n - k; i < n; ++i) ex.push_back(s[i] - t);
    ExceedanceSet e;
    try {
        e = ExceedanceSet::from_excesses(std::move(ex), t, n);
    } catch (const DegenerateSampleError&) {
        std::ostringstream os;
        os << "all top " << k << " values tie with the threshold " << t;
        throw DegenerateSampleError(os.str());
    }
    return e;
}

const char* method_name(Method m) noexcept {
    switch (m) {
        case Method::ML: return "ml";
        case Method::PWM: return "pwm";
        case Method::Bayes: return "bayes";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "ml") return Method::ML;
    if (name == "pwm") return Method::PWM;
    if (name == "bayes") return Method::Bayes;
    throw DomainError("unknown method '" + name + "' (expected ml, pwm or bayes)");
}

double gp_loglik(const GpParams& p, std::span<const double> excesses) noexcept {
    double s = 0.0;
    for (double x : excesses) {
        const double l = gp_logpdf(p, x);
        if (l == -kInf) return -kInf;
        s += l;
    }
    return s;
}

GpFit fit_pwm(const ExceedanceSet& e) {
    check_excess_count(e);
    const std::size_t m = e.size();
    const double md = static_cast<double>(m);
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        const double y = e.excesses[m - i];  // i-th largest
        m1 += y;
        m2 += (static_cast<double>(i) / md) * y;
    }
    m1 /= md;
    m2 /= md;
    const double r = m1 / (2.0 * m2) - 1.0;
    if (r == 0.0) throw NumericError("PWM moment ratio M1/(2 M2) equals 1; estimator is singular");
    const double g = 1.0 - 1.0 / r;
    const double sigma = m1 / r;
    if (!(sigma > 0.0) || !(g > -0.5) || !std::isfinite(g)) {
        std::ostringstream os;
        os << "PWM estimate (gamma=" << g << ", sigma=" << sigma << ") is outside the valid parameter space";
        throw OutOfRegimeError(os.str());
    }
    GpFit f;
    f.params = GpParams(g, sigma);
    f.method = Method::PWM;
    f.k = e.k;
    f.threshold = e.threshold;
    f.converged = true;
    f.loglik = gp_loglik(f.params, e.excesses);
    f.pwm_regime_ok = g < 0.5;
    return f;
}

GpFit fit_ml(const ExceedanceSet& e) {
    check_excess_count(e);
    const auto& x = e.excesses;
    const double max_x = x.back();
    if (x.front() == max_x) {
        std::ostringstream os;
        os << "all " << x.size() << " excesses equal " << max_x
           << "; the likelihood is unbounded on the gamma = -1/2 boundary";
        throw ConvergenceError(os.str(), -0.5, max_x / 2.0);
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());

    std::vector<std::vector<double>> starts;
    try {
        const GpFit pwm = fit_pwm(e);
        starts.push_back(feasible_start(pwm.params.gamma(), pwm.params.sigma(), max_x));
    } catch (const Error&) {
    }
    starts.push_back(feasible_start(0.1, mean, max_x));
    const std::vector<std::vector<double>> restarts{feasible_start(-0.25, mean * 1.25, max_x),
                                                    feasible_start(0.5, mean * 0.5, max_x)};

    const MlObjective obj{x};
    optim::BfgsOptions opts;
    opts.max_iterations = 500;
    opts.grad_tol = 1e-9;

    std::optional<optim::BfgsResult> best;
    auto acceptable = [](const optim::BfgsResult& r) { return r.converged || r.grad_norm < 1e-6; };
    auto run = [&](const std::vector<std::vector<double>>& xs) {
        for (const auto& x0 : xs) {
            optim::BfgsResult r = optim::minimize_bfgs(obj, x0, opts);
            if (!std::isfinite(r.value)) continue;
            const bool better = !best || (acceptable(r) && !acceptable(*best)) ||
                                (acceptable(r) == acceptable(*best) && r.value < best->value);
            if (better) best = std::move(r);
        }
    };
    run(starts);
    if (!best || !acceptable(*best)) run(restarts);
    if (!best) throw ConvergenceError("ML optimizer found no feasible point", std::nan(""), std::nan(""));

    const double g = best->x[0];
    const double sigma = std::exp(best->x[1]);
    const bool at_boundary = g < -0.5 + kBoundaryGap;
    if (!acceptable(*best) && !at_boundary) {
        std::ostringstream os;
        os << "ML optimizer did not converge (" << best->reason << ", gradient norm " << best->grad_norm
           << ")";
        throw ConvergenceError(os.str(), g, sigma);
    }
    GpFit f;
    f.params = GpParams(std::max(g, std::nextafter(-0.5, 0.0)), sigma);
    f.method = Method::ML;
    f.k = e.k;
    f.threshold = e.threshold;
    f.converged = acceptable(*best);
    f.loglik = -best->value * static_cast<double>(x.size());
    f.grad_norm = best->grad_norm;
    f.iterations = best->iterations;
    f.at_boundary = at_boundary;
    return f;
}

double fit_hill(const SortedSample& s, std::size_t k) {
    const std::size_t n = s.size();
    if (k < 1 || k >= n) throw DomainError("Hill estimator needs 1 <= k < n");
    const double base = s[n - k - 1];
    if (!(base > 0.0)) throw DomainError("Hill estimator needs the top k+1 order statistics to be positive");
    const double lb = std::log(base);
    double acc = 0.0;
    for (std::size_t i = n - k; i < n; ++i) acc += std::log(s[i]) - lb;
    return acc / static_cast<double>(k);
}

double endpoint_estimate(const GpFit& fit, double threshold) noexcept {
    const double g = fit.params.gamma();
    if (g < 0.0) return threshold - fit.params.sigma() / g;
    return kInf;
}

std::optional<std::array<double, 4>> ml_observed_information(const ExceedanceSet& e, const GpParams& p) {
    const MlObjective obj{e.excesses};
    const double m = static_cast<double>(e.size());
    const std::array<double, 2> th{p.gamma(), std::log(p.sigma())};
    std::array<double, 4> h{};
    for (int j = 0; j < 2; ++j) {
        const double step = 1e-5 * std::max(1.0, std::fabs(th[j]));
        std::array<double, 2> up = th;
        std::array<double, 2> dn = th;
        up[j] += step;
        dn[j] -= step;
        std::array<double, 2> gu{};
        std::array<double, 2> gd{};
        if (!std::isfinite(obj(up, gu)) || !std::isfinite(obj(dn, gd))) return std::nullopt;
        for (int i = 0; i < 2; ++i) h[i * 2 + j] = m * (gu[i] - gd[i]) / (2.0 * step);
    }
    const double off = 0.5 * (h[1] + h[2]);
    h[1] = h[2] = off;
    if (!(h[0] > 0.0) || !(h[0] * h[3] - off * off > 0.0)) return std::nullopt;
    return h;
}

std::vector<StabilityPoint> gamma_stability_trace(const SortedSample& s, std::span<const std::size_t> ks,
                                                  Method method) {
    if (method == Method::Bayes) throw DomainError("stability trace supports ml and pwm only");
    std::vector<StabilityPoint> out;
    out.reserve(ks.size());
    for (std::size_t k : ks) {
        StabilityPoint pt;
        pt.k = k;
        try {
            const ExceedanceSet e = select_exceedances(s, k);
            pt.fit = method == Method::ML ? fit_ml(e) : fit_pwm(e);
        } catch (const Error& err) {
            pt.error = err.what();
        }
        out.push_back(std::move(pt));
    }
    return out;
}

}  // namespace potpred
