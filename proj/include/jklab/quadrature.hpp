#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace jklab {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1,1].
inline constexpr double kKronrodNodes[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813};
inline constexpr double kKronrodWeights[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529};
inline constexpr double kGaussWeights[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870};

struct PanelEstimate {
    double kronrod;
    double error;
};

inline PanelEstimate gk15_panel(const std::function<double(double)>& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double kron = 0.0, gauss = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double v = f(mid + half * kKronrodNodes[i]);
        kron += kKronrodWeights[i] * v;
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * v;
    }
    kron *= half;
    gauss *= half;
    return {kron, std::abs(kron - gauss)};
}

} // namespace detail

// Adaptive Gauss-Kronrod on [a,b].
inline QuadratureResult integrate_gk(const std::function<double(double)>& f, double a, double b,
                                     double rel_tol = 1e-10, double abs_tol = 0.0,
                                     int max_depth = 40) {
    QuadratureResult out;
    std::function<double(double, double, detail::PanelEstimate, int)> refine =
        [&](double lo, double hi, detail::PanelEstimate est, int depth) -> double {
        const double tol = std::max(abs_tol, rel_tol * std::abs(est.kronrod));
        if (est.error <= tol || depth >= max_depth) {
            if (depth >= max_depth && est.error > tol) out.converged = false;
            out.error_estimate += est.error;
            return est.kronrod;
        }
        const double mid = 0.5 * (lo + hi);
        auto left = detail::gk15_panel(f, lo, mid);
        auto right = detail::gk15_panel(f, mid, hi);
        out.evaluations += 30;
        return refine(lo, mid, left, depth + 1) + refine(mid, hi, right, depth + 1);
    };
    auto first = detail::gk15_panel(f, a, b);
    out.evaluations += 15;
    out.value = refine(a, b, first, 0);
    return out;
}

// Adaptive Simpson, an independent second rule for cross-checks.
inline QuadratureResult integrate_simpson(const std::function<double(double)>& f, double a, double b,
                                          double rel_tol = 1e-10, double abs_tol = 0.0,
                                          int max_depth = 48) {
    QuadratureResult out;
    auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    };
    std::function<double(double, double, double, double, double, double, int)> refine =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole,
            int depth) -> double {
        const double mid = 0.5 * (lo + hi);
        const double fl = f(0.5 * (lo + mid));
        const double fr = f(0.5 * (mid + hi));
        out.evaluations += 2;
        const double left = simpson(lo, mid, flo, fl, fmid);
        const double right = simpson(mid, hi, fmid, fr, fhi);
        const double err = (left + right - whole) / 15.0;
        const double tol = std::max(abs_tol, rel_tol * std::abs(left + right));
        if (std::abs(err) <= tol || depth >= max_depth) {
            if (depth >= max_depth && std::abs(err) > tol) out.converged = false;
            out.error_estimate += std::abs(err);
            return left + right + err;
        }
        return refine(lo, mid, flo, fl, fmid, left, depth + 1) +
               refine(mid, hi, fmid, fr, fhi, right, depth + 1);
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    out.evaluations += 3;
    out.value = refine(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 0);
    return out;
}

} // namespace jklab
