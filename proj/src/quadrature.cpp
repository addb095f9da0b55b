#include "potpred/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "potpred/errors.hpp"

namespace potpred {

namespace {

constexpr std::size_t kWorkspaceLimit = 2000;
constexpr double kHellingerTol = 1e-8;

struct WorkspaceDeleter {
    void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};

void disable_gsl_abort() {
    static std::once_flag once;
    std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct Thunk {
    const Density* f;
    double lower;
    bool unbounded;
};

double evaluate(double t, void* raw) {
    const auto* th = static_cast<const Thunk*>(raw);
    if (!th->unbounded) return (*th->f)(t);
    const double one_minus = 1.0 - t;
    if (one_minus <= 0.0) return 0.0;
    const double x = th->lower + t / one_minus;
    const double v = (*th->f)(x);
    return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
}

QuadratureResult integrate_piece(const Density& f, double a, double b, double abs_tol) {
    disable_gsl_abort();
    std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter> ws(
        gsl_integration_workspace_alloc(kWorkspaceLimit));
    Thunk th{&f, a, !std::isfinite(b)};
    gsl_function fn{&evaluate, &th};
    const double lo = th.unbounded ? 0.0 : a;
    const double hi = th.unbounded ? 1.0 : b;
    double value = 0.0;
    double err = 0.0;
    const int status = gsl_integration_qag(&fn, lo, hi, abs_tol, 0.0, kWorkspaceLimit,
                                           GSL_INTEG_GAUSS21, ws.get(), &value, &err);
    if (status != GSL_SUCCESS && !(err <= abs_tol)) {
        std::ostringstream os;
        os << "quadrature did not converge on [" << a << ", " << b << "]: " << gsl_strerror(status)
           << " (estimate " << value << ", error " << err << ", target " << abs_tol << ", "
           << ws->size << " subintervals)";
        throw NumericError(os.str());
    }
    return {value, err, 1};
}

}  // namespace

QuadratureResult integrate(const Density& f, double lower, double upper, double abs_tol,
                           std::span<const double> breakpoints) {
    if (!(upper > lower) || !std::isfinite(lower)) throw DomainError("empty or invalid integration range");
    std::vector<double> cuts{lower};
    for (double b : breakpoints)
        if (std::isfinite(b) && b > lower && b < upper) cuts.push_back(b);
    std::sort(cuts.begin() + 1, cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(upper);

    const std::size_t pieces = cuts.size() - 1;
    const double piece_tol = abs_tol / static_cast<double>(pieces);
    QuadratureResult total;
    for (std::size_t i = 0; i < pieces; ++i) {
        const QuadratureResult r = integrate_piece(f, cuts[i], cuts[i + 1], piece_tol);
        total.value += r.value;
        total.abs_error += r.abs_error;
        total.pieces += 1;
    }
    return total;
}

double hellinger(const Density& f, const Density& g, const Support& support,
                 std::span<const double> breakpoints) {
    const Density integrand = [&](double x) {
        const double fx = f(x);
        const double gx = g(x);
        const double d = std::sqrt(fx > 0.0 ? fx : 0.0) - std::sqrt(gx > 0.0 ? gx : 0.0);
        return d * d;
    };
    const QuadratureResult r = integrate(integrand, support.lower, support.upper, kHellingerTol, breakpoints);
    const double h2 = std::clamp(0.5 * r.value, 0.0, 1.0);
    return std::sqrt(h2);
}

}  // namespace potpred
