#include "jklab/scale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "jklab/quadrature.hpp"

namespace jklab {

namespace {

constexpr double kDyadicLo = -20;
constexpr double kDyadicHi = 20;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

ScaleFunction::ScaleFunction() : ScaleFunction(pure_power(1.0)) {}

ScaleFunction ScaleFunction::piecewise_power(std::vector<double> breaks,
                                             std::vector<double> exponents) {
    require(exponents.size() == breaks.size() + 1,
            "piecewise_power: need one exponent per segment (breaks+1)");
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        require(breaks[i] > 0.0, "piecewise_power: breakpoints must be positive");
        if (i > 0) require(breaks[i] > breaks[i - 1], "piecewise_power: breakpoints must increase");
    }
    for (double a : exponents)
        require(a > 0.0, "piecewise_power: every segment exponent must be > 0");

    ScaleFunction s{Raw{}};
    s.kind_ = Kind::piecewise;
    s.pw_.breaks = std::move(breaks);
    s.pw_.exponents = std::move(exponents);

    // Segment containing r=1, then continuity outward; coefficient there
    // is 1 so that s(1)=1 exactly.
    const auto& b = s.pw_.breaks;
    const auto& a = s.pw_.exponents;
    std::size_t unit = std::lower_bound(b.begin(), b.end(), 1.0) - b.begin();
    std::vector<double> c(a.size(), 1.0);
    for (std::size_t i = unit; i-- > 0;)
        c[i] = c[i + 1] * std::pow(b[i], a[i + 1] - a[i]);
    for (std::size_t i = unit + 1; i < a.size(); ++i)
        c[i] = c[i - 1] * std::pow(b[i - 1], a[i - 1] - a[i]);
    s.pw_.coeffs = std::move(c);

    s.pw_.break_values.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        s.pw_.break_values[i] = s.pw_.coeffs[i] * std::pow(b[i], s.pw_.exponents[i]);

    const auto [lo, hi] = std::minmax_element(s.pw_.exponents.begin(), s.pw_.exponents.end());
    s.window_ = {*lo, *hi, 1.0, 1.0};
    return s;
}

ScaleFunction ScaleFunction::pure_power(double exponent) {
    return piecewise_power({}, {exponent});
}

ScaleFunction ScaleFunction::from_table(std::vector<double> radii, std::vector<double> values) {
    require(radii.size() == values.size(), "table: radii/values size mismatch");
    require(radii.size() >= 2, "table: need at least two samples");
    ScaleFunction s{Raw{}};
    s.kind_ = Kind::table;
    s.table_.log_r.resize(radii.size());
    s.table_.log_v.resize(values.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(radii[i] > 0.0 && values[i] > 0.0, "table: samples must be positive");
        if (i > 0) {
            if (!(radii[i] > radii[i - 1]))
                throw std::invalid_argument("table: radii not increasing at index " +
                                            std::to_string(i));
            if (!(values[i] > values[i - 1]))
                throw std::invalid_argument("table: values not strictly increasing between r=" +
                                            std::to_string(radii[i - 1]) + " and r=" +
                                            std::to_string(radii[i]));
        }
        s.table_.log_r[i] = std::log(radii[i]);
        s.table_.log_v[i] = std::log(values[i]);
    }
    // normalize so the interpolant passes through (1,1)
    ScaleFunction probe = s;
    probe.window_ = {0, 0, 1, 1};
    const double at_one = probe.eval_positive(1.0);
    const double shift = std::log(at_one);
    for (double& lv : s.table_.log_v) lv -= shift;

    // Exponents from wide pairs (they wash out short flat patches),
    // constants fitted over every node pair so the sandwich holds with
    // the declared certificate.
    const auto& lr = s.table_.log_r;
    const auto& lv = s.table_.log_v;
    const double span = lr.back() - lr.front();
    const double gap = std::min(span / 2.0, 5.0 * std::log(2.0));
    double beta1 = 1e300, beta2 = -1e300;
    for (std::size_t i = 0; i < lr.size(); ++i)
        for (std::size_t j = i + 1; j < lr.size(); ++j) {
            if (lr[j] - lr[i] < gap - 1e-12) continue;
            const double slope = (lv[j] - lv[i]) / (lr[j] - lr[i]);
            beta1 = std::min(beta1, slope);
            beta2 = std::max(beta2, slope);
        }
    double c1 = 1.0, c2 = 1.0;
    for (std::size_t i = 0; i < lr.size(); ++i)
        for (std::size_t j = i + 1; j < lr.size(); ++j) {
            const double dv = lv[j] - lv[i], dr = lr[j] - lr[i];
            c1 = std::min(c1, std::exp(dv - beta1 * dr));
            c2 = std::max(c2, std::exp(dv - beta2 * dr));
        }
    s.window_ = {beta1, beta2, c1, c2};
    return s;
}

ScaleFunction ScaleFunction::splice(ScaleFunction small_part, ScaleFunction large_part) {
    const double sv = small_part.eval(1.0), lv = large_part.eval(1.0);
    require(std::abs(sv - 1.0) < 1e-12 && std::abs(lv - 1.0) < 1e-12,
            "splice: both parts must be normalized at r=1");
    ScaleFunction s{Raw{}};
    s.kind_ = Kind::splice;
    s.window_ = {std::min(small_part.window().beta1, large_part.window().beta1),
                 std::max(small_part.window().beta2, large_part.window().beta2),
                 small_part.window().c1 * large_part.window().c1,
                 small_part.window().c2 * large_part.window().c2};
    s.splice_.small_part = std::make_shared<ScaleFunction>(std::move(small_part));
    s.splice_.large_part = std::make_shared<ScaleFunction>(std::move(large_part));
    return s;
}

bool ScaleFunction::is_piecewise_power() const { return kind_ == Kind::piecewise; }
bool ScaleFunction::is_table() const { return kind_ == Kind::table; }

double ScaleFunction::eval_positive(double r) const {
    switch (kind_) {
    case Kind::piecewise: {
        const auto& b = pw_.breaks;
        const std::size_t i = std::lower_bound(b.begin(), b.end(), r) - b.begin();
        return pw_.coeffs[i] * std::pow(r, pw_.exponents[i]);
    }
    case Kind::table: {
        const auto& lr = table_.log_r;
        const auto& lv = table_.log_v;
        const double x = std::log(r);
        std::size_t j;
        if (x <= lr.front())
            j = 1;
        else if (x >= lr.back())
            j = lr.size() - 1;
        else
            j = std::upper_bound(lr.begin(), lr.end(), x) - lr.begin();
        const double slope = (lv[j] - lv[j - 1]) / (lr[j] - lr[j - 1]);
        return std::exp(lv[j - 1] + slope * (x - lr[j - 1]));
    }
    case Kind::splice:
        return r <= 1.0 ? splice_.small_part->eval(r) : splice_.large_part->eval(r);
    }
    return 0.0;
}

double ScaleFunction::eval(double r) const {
    if (r < 0.0) throw std::domain_error("scale eval: radius must be >= 0");
    if (r == 0.0) return 0.0;
    return eval_positive(r);
}

double ScaleFunction::invert(double t) const {
    if (!(t > 0.0)) throw std::domain_error("scale invert: value must be > 0");
    switch (kind_) {
    case Kind::piecewise: {
        const auto& bv = pw_.break_values;
        const std::size_t i = std::lower_bound(bv.begin(), bv.end(), t) - bv.begin();
        return std::pow(t / pw_.coeffs[i], 1.0 / pw_.exponents[i]);
    }
    case Kind::table: {
        const auto& lr = table_.log_r;
        const auto& lv = table_.log_v;
        const double y = std::log(t);
        std::size_t j;
        if (y <= lv.front())
            j = 1;
        else if (y >= lv.back())
            j = lv.size() - 1;
        else
            j = std::upper_bound(lv.begin(), lv.end(), y) - lv.begin();
        const double slope = (lr[j] - lr[j - 1]) / (lv[j] - lv[j - 1]);
        return std::exp(lr[j - 1] + slope * (y - lv[j - 1]));
    }
    case Kind::splice:
        return t <= 1.0 ? splice_.small_part->invert(t) : splice_.large_part->invert(t);
    }
    return 0.0;
}

nlohmann::json ScaleFunction::to_json() const {
    nlohmann::json doc;
    switch (kind_) {
    case Kind::piecewise:
        doc["kind"] = "piecewise_power";
        doc["breaks"] = pw_.breaks;
        doc["exponents"] = pw_.exponents;
        break;
    case Kind::table: {
        doc["kind"] = "table";
        std::vector<double> r(table_.log_r.size()), v(table_.log_v.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = std::exp(table_.log_r[i]);
            v[i] = std::exp(table_.log_v[i]);
        }
        doc["r"] = r;
        doc["v"] = v;
        break;
    }
    case Kind::splice:
        doc["kind"] = "splice";
        doc["small"] = splice_.small_part->to_json();
        doc["large"] = splice_.large_part->to_json();
        break;
    }
    return doc;
}

ScaleFunction ScaleFunction::from_json(const nlohmann::json& doc) {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "piecewise_power")
        return piecewise_power(doc.at("breaks").get<std::vector<double>>(),
                               doc.at("exponents").get<std::vector<double>>());
    if (kind == "table")
        return from_table(doc.at("r").get<std::vector<double>>(),
                          doc.at("v").get<std::vector<double>>());
    if (kind == "splice")
        return splice(from_json(doc.at("small")), from_json(doc.at("large")));
    throw std::invalid_argument("unknown scale kind: " + kind);
}

double lower_scaling_index(const ScaleFunction& s, ScalingRange range) {
    const int klo = range == ScalingRange::Small ? kDyadicLo : 0;
    const int khi = range == ScalingRange::Small ? 0 : kDyadicHi;
    std::vector<double> logs(khi - klo + 1);
    for (int k = klo; k <= khi; ++k)
        logs[k - klo] = std::log(s.eval(std::ldexp(1.0, k)));
    double best = 1e300;
    const double ln2 = std::log(2.0);
    for (int i = 0; i < static_cast<int>(logs.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(logs.size()); ++j)
            best = std::min(best, (logs[j] - logs[i]) / ((j - i) * ln2));
    return best;
}

ScaleFunction make_bar_phi_c(const ScaleFunction& phi_c) {
    nlohmann::json doc = phi_c.to_json();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "piecewise_power") {
        auto exps = doc.at("exponents").get<std::vector<double>>();
        for (std::size_t i = 0; i < exps.size(); ++i) {
            if (!(exps[i] > 1.0))
                throw std::invalid_argument(
                    "bar_phi_c: phi_c(r)/r is not strictly increasing on segment " +
                    std::to_string(i) + " (exponent " + std::to_string(exps[i]) + " <= 1)");
            exps[i] -= 1.0;
        }
        return ScaleFunction::piecewise_power(doc.at("breaks").get<std::vector<double>>(), exps);
    }
    if (kind == "table") {
        auto r = doc.at("r").get<std::vector<double>>();
        auto v = doc.at("v").get<std::vector<double>>();
        for (std::size_t i = 0; i < r.size(); ++i) v[i] /= r[i];
        return ScaleFunction::from_table(r, v);  // rejects non-increasing pairs
    }
    // splice
    return ScaleFunction::splice(make_bar_phi_c(ScaleFunction::from_json(doc.at("small"))),
                                 make_bar_phi_c(ScaleFunction::from_json(doc.at("large"))));
}

ScaleFunction compose_phi(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                          double beta_star_small, double beta_star_large) {
    if (!(phi_c.window().beta1 > 1.0))
        throw std::invalid_argument("compose_phi: phi_c must have beta1 > 1");
    const bool c_small = beta_star_small > 1.0;
    const bool c_large = beta_star_large > 1.0;
    ScaleFunction out = (c_small == c_large)
                            ? (c_small ? phi_c : phi_j)
                            : ScaleFunction::splice(c_small ? phi_c : phi_j,
                                                    c_large ? phi_c : phi_j);
    // monotonicity scan on a quarter-dyadic grid
    double prev = 0.0;
    for (int q = 4 * kDyadicLo; q <= 4 * kDyadicHi; ++q) {
        const double r = std::pow(2.0, q / 4.0);
        const double v = out.eval(r);
        if (!(v > prev))
            throw std::invalid_argument("compose_phi: composite not strictly increasing near r=" +
                                        std::to_string(r));
        prev = v;
    }
    return out;
}

ScaleTriple make_scale_triple(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                              std::string* branch_warning, double branch_warn_tol) {
    ScaleTriple triple;
    triple.phi_j = phi_j;
    triple.phi_c = phi_c;
    triple.beta_star_small = lower_scaling_index(phi_j, ScalingRange::Small);
    triple.beta_star_large = lower_scaling_index(phi_j, ScalingRange::Large);
    if (branch_warning) {
        std::ostringstream w;
        if (std::abs(triple.beta_star_small - 1.0) < branch_warn_tol)
            w << "beta_* = " << triple.beta_star_small << " is close to the branch point 1; ";
        if (std::abs(triple.beta_star_large - 1.0) < branch_warn_tol)
            w << "beta^* = " << triple.beta_star_large << " is close to the branch point 1; ";
        *branch_warning = w.str();
    }
    triple.phi = compose_phi(phi_j, phi_c, triple.beta_star_small, triple.beta_star_large);
    try {
        triple.bar_phi_c = make_bar_phi_c(phi_c);
    } catch (const std::invalid_argument& e) {
        triple.bar_phi_c.reset();
        if (branch_warning) *branch_warning += std::string("bar_phi_c unavailable: ") + e.what();
    }
    double c0 = 1.0;
    for (int k = kDyadicLo; k <= kDyadicHi; ++k) {
        const double r = std::ldexp(1.0, k);
        c0 = std::max(c0, triple.phi.eval(r) / phi_j.eval(r));
    }
    triple.domination_c0 = c0;
    return triple;
}

const ScaleFunction& ScaleTriple::bar_phi_c_or_throw() const {
    if (!bar_phi_c)
        throw std::runtime_error(
            "this scale triple has no bar_phi_c: phi_c(r)/r is not strictly increasing");
    return *bar_phi_c;
}

double induced_diffusive_scale(const ScaleFunction& phi_j, double r) {
    if (!(r > 0.0)) throw std::domain_error("induced_diffusive_scale: r must be > 0");
    const double s0 = r * 1e-8;
    // Local exponent at the left end; the integrand s/phi_j(s) behaves
    // like s^{1-a} there, so the s<s0 tail has a closed form.
    const double a = std::log2(phi_j.eval(2.0 * s0) / phi_j.eval(s0));
    if (!(a < 2.0))
        throw std::runtime_error(
            "induced_diffusive_scale: integral of s/phi_j diverges at 0 (local exponent " +
            std::to_string(a) + " >= 2)");
    const double tail = s0 * s0 / (phi_j.eval(s0) * (2.0 - a));
    auto integrand = [&](double u) {
        const double s = std::exp(u);
        return s * s / phi_j.eval(s);
    };
    auto gk = integrate_gk(integrand, std::log(s0), std::log(r), 1e-11);
    if (!gk.converged)
        throw std::runtime_error("induced_diffusive_scale: quadrature did not converge at r=" +
                                 std::to_string(r) + " (error estimate " +
                                 std::to_string(gk.error_estimate) + ")");
    const double integral = tail + gk.value;
    return r * r / (2.0 * integral);
}

ScaleFunction phi_c_from_phi_j(const ScaleFunction& phi_j) {
    // Needs the small-scale window below 2, otherwise Phi degenerates.
    double max_small_slope = -1e300;
    for (int k = kDyadicLo; k < 0; ++k) {
        const double r = std::ldexp(1.0, k);
        max_small_slope =
            std::max(max_small_slope, std::log2(phi_j.eval(2.0 * r) / phi_j.eval(r)));
    }
    if (!(max_small_slope < 2.0))
        throw std::invalid_argument("phi_c_from_phi_j: phi_j must have upper exponent < 2 on (0,1]");

    const double phi_at_one = induced_diffusive_scale(phi_j, 1.0);
    std::vector<double> radii, values;
    for (int q = 4 * kDyadicLo; q <= 4 * kDyadicHi; ++q) {
        const double r = std::pow(2.0, q / 4.0);
        radii.push_back(r);
        values.push_back(r <= 1.0 ? r * r : induced_diffusive_scale(phi_j, r) / phi_at_one);
    }
    return ScaleFunction::from_table(radii, values);
}

CrossoverResult crossover_radius(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                                 double t, const CrossoverConstants& constants) {
    if (!(t >= 1.0)) throw std::domain_error("crossover_radius: t must be >= 1");
    const double rc = phi_c.invert(t);
    const double rj = phi_j.invert(t);
    if (!(rc >= rj * (1.0 - 1e-12)))
        throw std::domain_error("crossover_radius: requires phi_c^{-1}(t) >= phi_j^{-1}(t)");

    const ScaleFunction bar = make_bar_phi_c(phi_c);
    auto log_f1 = [&](double r) {
        const double g = r / bar.invert(t / r);
        return constants.c_star * g - std::log(g);
    };
    auto log_f2 = [&](double r) {
        return std::log(constants.c_upper) + std::log(bar.invert(t / r)) - std::log(rj);
    };
    auto h = [&](double r) { return log_f1(r) - log_f2(r); };

    CrossoverResult out;
    const double lo = constants.c0 * rc;
    out.bracket_lo = lo;
    if (h(lo) >= 0.0) return out;  // F1 already above F2: no crossing

    double hi = lo;
    for (int k = 0; k < 60 && h(hi) < 0.0; ++k) hi *= 2.0;
    if (h(hi) < 0.0) return out;
    out.bracket_hi = hi;

    // F1 must increase and F2 decrease on the bracket before bisecting.
    double prev1 = log_f1(lo), prev2 = log_f2(lo);
    for (int i = 1; i <= 64; ++i) {
        const double r = lo * std::pow(hi / lo, i / 64.0);
        const double v1 = log_f1(r), v2 = log_f2(r);
        if (!(v1 > prev1) || !(v2 < prev2))
            throw std::runtime_error("crossover_radius: F1/F2 not monotone on the bracket");
        prev1 = v1;
        prev2 = v2;
    }

    double a = lo, b = hi;
    for (int iter = 0; iter < 200 && (b - a) > 1e-8 * a; ++iter) {
        const double mid = 0.5 * (a + b);
        (h(mid) < 0.0 ? a : b) = mid;
    }
    out.found = true;
    out.r_star = 0.5 * (a + b);
    return out;
}

} // namespace jklab
