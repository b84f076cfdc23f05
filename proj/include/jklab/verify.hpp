#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "jklab/envelope.hpp"
#include "jklab/process.hpp"
#include "jklab/scale.hpp"
#include "jklab/space.hpp"

namespace jklab {

// Fitted four-constant comparability c1 f(c2 t) <= p <= c3 f(c4 t).
struct CorridorReport {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;
    double worst_ratio = 1.0;  // c3/c1
    std::string domain;
    bool pass = false;
    nlohmann::json to_json() const;
};

struct CorridorDomain {
    std::size_t center = 0;
    double min_distance = 0.0;
    double max_distance = 0.0;  // callers keep this within diameter/4
};

struct CorridorOptions {
    std::vector<double> dilations = {0.25, 0.5, 1.0, 2.0, 4.0};
    double threshold = 100.0;
};

CorridorReport fit_corridor(const FiniteMetricMeasureSpace& space,
                            const std::vector<HeatKernelMatrix>& exact,
                            const std::function<double(double, double)>& envelope,
                            const CorridorDomain& domain, const CorridorOptions& options = {});

struct ConditionVerdict {
    std::string condition;
    std::map<std::string, double> constants;
    std::vector<std::pair<double, double>> per_scale;  // (scale, fitted value)
    double stability = 1.0;                            // max/min across scales
    bool pass = false;
    std::string domain;  // probed scales / region
    std::string notes;
    std::uint64_t seed = 0;
    nlohmann::json to_json() const;
};

// Smallest eigenvalue of the negative generator killed outside `domain`,
// by inverse power iteration on the mu-weighted form, to 1e-10.
double smallest_dirichlet_eigenvalue(const Generator& gen,
                                     const std::vector<std::size_t>& domain);

// Optimal Poincare constant sup_f Var_{ball}(f) / E_{enlarged}(f,f) as a
// generalized eigenvalue; `enlarged` must contain `ball`. Returns a
// negative value when the restricted form is degenerate (disconnected).
double poincare_optimal_constant(const FiniteMetricMeasureSpace& space,
                                 const JumpKernelSpec& kernel,
                                 const std::vector<std::size_t>& ball,
                                 const std::vector<std::size_t>& enlarged);

// Energy density of the linear ramp cutoff between B(x0,R) and
// B(x0,R+r): Gamma(x) = sum_y (phi(x)-phi(y))^2 J(x,y) mu_y.
std::vector<double> cutoff_energy_profile(const FiniteMetricMeasureSpace& space,
                                          const JumpKernelSpec& kernel, std::size_t x0,
                                          double inner_radius, double width);

ConditionVerdict check_vd_rvd_condition(const FiniteMetricMeasureSpace& space,
                                        const std::vector<double>& radii,
                                        double stability_threshold = 10.0);

ConditionVerdict check_faber_krahn(const Generator& gen, std::size_t center,
                                   const std::vector<double>& radii, const ScaleFunction& phi,
                                   double stability_threshold = 10.0);

ConditionVerdict check_poincare(const Generator& gen, std::size_t center,
                                const std::vector<double>& radii, const ScaleFunction& phi,
                                double kappa = 2.0, double stability_threshold = 10.0);

ConditionVerdict check_cutoff_energy(const FiniteMetricMeasureSpace& space,
                                     const JumpKernelSpec& kernel, std::size_t x0,
                                     const std::vector<double>& radii, const ScaleFunction& phi,
                                     double stability_threshold = 10.0);

ConditionVerdict check_tail_integral(const FiniteMetricMeasureSpace& space,
                                     const JumpKernelSpec& kernel, const ScaleFunction& phi_j,
                                     const std::vector<double>& radii,
                                     double stability_threshold = 10.0);

ConditionVerdict check_ujs(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel,
                           const std::vector<double>& radii, double ratio_threshold,
                           std::uint64_t seed);

struct HarnackCylinder {
    double c1 = 0.25, c2 = 0.5, c3 = 0.75, c4 = 1.0;
    double c5 = 2.0;  // caloric-domain ball multiplier
    int time_samples = 5;
    int random_functions = 4;
    // Point-mass probes sit at these multiples of the probed radius, so
    // the family rescales with R and the base ratios stay level.
    std::vector<double> probe_multipliers = {0.0, 0.5, 1.0, 2.0, 8.0};
};

ConditionVerdict check_phi_harnack(const Generator& gen, const ScaleFunction& phi,
                                   std::size_t center, const std::vector<double>& radii,
                                   const HarnackCylinder& cylinder, std::uint64_t seed,
                                   double stability_threshold = 10.0);

ConditionVerdict check_exit_scaling(const Generator& gen, const ScaleFunction& phi,
                                    std::size_t center, const std::vector<double>& radii,
                                    double stability_threshold = 10.0);

} // namespace jklab
