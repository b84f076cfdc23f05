#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace jklab {

// Two-sided power sandwich certificate:
//   c1 (R/r)^beta1 <= s(R)/s(r) <= c2 (R/r)^beta2  for 0 < r <= R.
struct ExponentWindow {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double c1 = 1.0;
    double c2 = 1.0;
};

// Strictly increasing scale r -> s(r) with s(0)=0 and s(1)=1.
// Representations: piecewise power segments, a log-log interpolated
// table, or a splice of two scales at r=1.
class ScaleFunction {
public:
    ScaleFunction();  // the identity scale r -> r

    // `breaks` are the interior segment boundaries (may be empty);
    // segment i covers (breaks[i-1], breaks[i]] and has exponents[i].
    // Coefficients are derived from continuity and s(1)=1.
    static ScaleFunction piecewise_power(std::vector<double> breaks,
                                         std::vector<double> exponents);
    static ScaleFunction pure_power(double exponent);
    // Strictly increasing samples, interpolated linearly in log-log
    // coordinates and extrapolated with the boundary slopes. Values are
    // rescaled so the interpolant passes through (1,1).
    static ScaleFunction from_table(std::vector<double> radii,
                                    std::vector<double> values);
    // s(r) = small(r) for r<=1, large(r) for r>1. Both parts must be
    // normalized (value 1 at r=1), which makes the splice continuous.
    static ScaleFunction splice(ScaleFunction small_part, ScaleFunction large_part);

    double eval(double r) const;
    double invert(double t) const;

    const ExponentWindow& window() const { return window_; }

    bool is_piecewise_power() const;
    bool is_table() const;

    nlohmann::json to_json() const;
    static ScaleFunction from_json(const nlohmann::json& doc);

private:
    struct Raw {};
    explicit ScaleFunction(Raw) {}

    struct Piecewise {
        std::vector<double> breaks;      // interior breakpoints, increasing
        std::vector<double> exponents;   // one per segment
        std::vector<double> coeffs;      // derived
        std::vector<double> break_values;
    };
    struct Table {
        std::vector<double> log_r;
        std::vector<double> log_v;
    };
    struct Splice {
        std::shared_ptr<ScaleFunction> small_part;
        std::shared_ptr<ScaleFunction> large_part;
    };

    enum class Kind { piecewise, table, splice } kind_ = Kind::piecewise;
    Piecewise pw_;
    Table table_;
    Splice splice_;
    ExponentWindow window_;

    double eval_positive(double r) const;
};

enum class ScalingRange { Small, Large };

// Infimum over dyadic pairs r<R in [2^-20,1] (Small) or [1,2^20] (Large)
// of log(s(R)/s(r)) / log(R/r). Exact for a pure power.
double lower_scaling_index(const ScaleFunction& s, ScalingRange range);

// bar_phi_c(r) := phi_c(r)/r, verified strictly increasing.
ScaleFunction make_bar_phi_c(const ScaleFunction& phi_c);

// Branch selection between phi_j and phi_c at the unit radius, driven by
// the lower scaling indices of phi_j.
ScaleFunction compose_phi(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                          double beta_star_small, double beta_star_large);

struct ScaleTriple {
    ScaleFunction phi_j;
    ScaleFunction phi_c;
    ScaleFunction phi;
    // Absent when phi_c(r)/r fails the monotonicity scan; only a
    // comparable increasing function is guaranteed to exist in general,
    // and the direct quotient is the one this module builds.
    std::optional<ScaleFunction> bar_phi_c;
    double beta_star_small = 0.0;
    double beta_star_large = 0.0;
    double domination_c0 = 1.0;   // phi(r) <= c0 * phi_j(r) on the dyadic grid

    const ScaleFunction& bar_phi_c_or_throw() const;

    bool small_side_diffusive() const { return beta_star_small > 1.0; }
    bool large_side_diffusive() const { return beta_star_large > 1.0; }
};

// Builds the composite scale, bar_phi_c, the scaling indices and the
// domination constant in one pass. Warns (via the returned triple's
// indices being near 1) is left to callers; values within
// `branch_warn_tol` of 1 are reported through the optional out-param.
ScaleTriple make_scale_triple(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                              std::string* branch_warning = nullptr,
                              double branch_warn_tol = 0.05);

// Phi(r) = r^2 / (2 * int_0^r s/phi_j(s) ds), evaluated by adaptive
// quadrature in log coordinates with an analytic small-s tail.
double induced_diffusive_scale(const ScaleFunction& phi_j, double r);

// The constructed phi_c: r^2 on (0,1], Phi(r)/Phi(1) on [1,inf),
// returned as a sampled scale over [2^-20, 2^20].
ScaleFunction phi_c_from_phi_j(const ScaleFunction& phi_j);

struct CrossoverConstants {
    double c_star = 1.0;   // multiplier inside the exponential of F1
    double c0 = 1.5;       // bracket start at c0 * phi_c^{-1}(t)
    double c_upper = 20.0; // multiplier of F2
};

struct CrossoverResult {
    bool found = false;
    double r_star = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

// Unique radius where F1 (increasing) crosses F2 (decreasing) beyond
// c0 * phi_c^{-1}(t). Returns found=false when the two curves do not
// cross on the bracket (the degenerate phi_c ~ phi_j situation).
CrossoverResult crossover_radius(const ScaleFunction& phi_j, const ScaleFunction& phi_c,
                                 double t, const CrossoverConstants& constants = {});

} // namespace jklab
