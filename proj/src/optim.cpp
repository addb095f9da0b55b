#include "potpred/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace potpred::optim {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sup_norm(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

// Dense inverse-Hessian approximation, row-major n x n.
struct InverseHessian {
    std::size_t n;
    Vec h;

    explicit InverseHessian(std::size_t dim) : n(dim), h(dim * dim, 0.0) { reset(1.0); }

    void reset(double diag) {
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) h[i * n + i] = diag;
    }

    Vec apply(const Vec& v) const {
        Vec out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i] += h[i * n + j] * v[j];
        return out;
    }

    // H <- (I - rho s y') H (I - rho y s') + rho s s'
    void update(const Vec& s, const Vec& y, double rho) {
        const Vec hy = apply(y);
        const double yhy = dot(y, hy);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
    }
};

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, Vec x, const BfgsOptions& opts) {
    const std::size_t n = x.size();
    BfgsResult res;
    Vec g(n, 0.0);
    double fx = f(x, g);
    if (!std::isfinite(fx)) {
        res.x = x;
        res.value = fx;
        res.grad = g;
        res.grad_norm = std::numeric_limits<double>::infinity();
        res.reason = "infeasible starting point";
        return res;
    }

    InverseHessian hinv(n);
    bool scaled = false;
    Vec xn(n), gn(n), d(n);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (sup_norm(g) < opts.grad_tol) {
            res.converged = true;
            res.reason = "gradient tolerance reached";
            break;
        }
        d = hinv.apply(g);
        for (double& v : d) v = -v;
        double slope = dot(d, g);
        if (!(slope < 0.0)) {
            hinv.reset(1.0);
            scaled = false;
            d = g;
            for (double& v : d) v = -v;
            slope = dot(d, g);
        }

        bool accepted = false;
        double fn = 0.0;
        const double xscale = 1.0 + sup_norm(x);
        for (double step = 1.0; step * sup_norm(d) > opts.min_step * xscale; step *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
            fn = f(xn, gn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (scaled) {
                // Retry from a steepest-descent direction before giving up.
                hinv.reset(1.0);
                scaled = false;
                continue;
            }
            res.reason = "line search failed";
            break;
        }

        Vec s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            if (!scaled) {
                hinv.reset(sy / dot(y, y));
                scaled = true;
            }
            hinv.update(s, y, 1.0 / sy);
        }
        x = xn;
        g = gn;
        fx = fn;
    }
    if (it == opts.max_iterations) res.reason = "iteration limit";

    res.x = x;
    res.value = fx;
    res.grad = g;
    res.grad_norm = sup_norm(g);
    res.iterations = it;
    return res;
}

Objective with_numeric_gradient(std::function<double(std::span<const double>)> f, double h) {
    return [f = std::move(f), h](std::span<const double> x, std::span<double> grad) {
        const double fx = f(x);
        if (grad.empty() || !std::isfinite(fx)) return fx;
        std::vector<double> xp(x.begin(), x.end());
        for (std::size_t i = 0; i < xp.size(); ++i) {
            const double step = h * std::max(1.0, std::fabs(x[i]));
            const double orig = xp[i];
            xp[i] = orig + step;
            const double up = f(xp);
            xp[i] = orig - step;
            const double down = f(xp);
            xp[i] = orig;
            if (std::isfinite(up) && std::isfinite(down))
                grad[i] = (up - down) / (2.0 * step);
            else if (std::isfinite(up))
                grad[i] = (up - fx) / step;
            else if (std::isfinite(down))
                grad[i] = (fx - down) / step;
            else
                grad[i] = 0.0;
        }
        return fx;
    };
}

}  // namespace potpred::optim
