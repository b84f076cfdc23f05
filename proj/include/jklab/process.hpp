#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jklab/rng.hpp"
#include "jklab/scale.hpp"
#include "jklab/space.hpp"

namespace jklab {

// Symmetric jump kernel J(x,y). Either the profile form
//   J(x,y) = a(x,y) / ( V(x, d(x,y)) * phi_j(d(x,y)) ),
// with a symmetric modulator a in [kappa_low, kappa_up], or an explicit
// symmetric matrix. The diagonal is zero; an optional truncation radius
// drops all jumps longer than rho.
class JumpKernelSpec {
public:
    using Modulator = std::function<double(std::size_t, std::size_t, double)>;

    static JumpKernelSpec formula(ScaleFunction phi_j, Modulator modulator = nullptr,
                                  double kappa_low = 1.0, double kappa_up = 1.0);
    static JumpKernelSpec explicit_matrix(Eigen::MatrixXd rates);

    // Full row J(x, .), computed with cumulative ball volumes (O(N log N)).
    std::vector<double> row(const FiniteMetricMeasureSpace& space, std::size_t x) const;
    double rate(const FiniteMetricMeasureSpace& space, std::size_t x, std::size_t y) const;

    JumpKernelSpec truncated(double rho) const;  // J * 1_{d <= rho}
    std::optional<double> truncation_radius() const { return rho_; }
    bool is_formula() const { return kind_ == Kind::formula; }
    const ScaleFunction& phi_j() const;
    double kappa_low() const { return kappa_low_; }
    double kappa_up() const { return kappa_up_; }

private:
    JumpKernelSpec() = default;
    enum class Kind { formula, matrix } kind_ = Kind::formula;
    ScaleFunction phi_j_;
    Modulator modulator_;
    double kappa_low_ = 1.0, kappa_up_ = 1.0;
    Eigen::MatrixXd matrix_;
    std::optional<double> rho_;
};

// Conservative symmetric jump generator: q_xy = J(x,y) mu_y off the
// diagonal, rows summing to zero. Immutable after construction.
class Generator {
public:
    Generator(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel);

    const FiniteMetricMeasureSpace& space() const { return *space_; }
    const Eigen::MatrixXd& rates() const { return rates_; }
    double uniformization_rate() const { return lambda_; }
    double escape_rate(std::size_t x) const { return -rates_(x, x); }

    // Jump distribution out of x; u uniform in [0,1). Lazily builds the
    // per-state cdf table (thread-safe).
    std::size_t sample_jump(std::size_t x, double u) const;

private:
    const FiniteMetricMeasureSpace* space_;
    Eigen::MatrixXd rates_;
    double lambda_ = 0.0;
    mutable std::vector<std::vector<double>> row_cdf_;
    mutable std::once_flag cdf_once_;
};

struct HeatKernelMatrix {
    double time = 0.0;
    Eigen::MatrixXd density;    // p(t,x,y) with respect to mu
    bool monte_carlo = false;
    Eigen::MatrixXd std_error;  // only for monte_carlo
};

struct UniformizationOptions {
    double poisson_tail = 1e-12;
    std::size_t max_points = 4096;
};

// exp(tQ) by uniformization: Poisson-weighted powers of the uniformized
// stochastic matrix, truncated when the remaining Poisson tail drops
// below the tolerance.
HeatKernelMatrix exact_heat_kernel(const Generator& gen, double t,
                                   const UniformizationOptions& options = {});

// Heat kernel of the generator killed outside `domain`, embedded back
// into the full index set (zero outside domain x domain).
HeatKernelMatrix dirichlet_heat_kernel(const Generator& gen,
                                       const std::vector<std::size_t>& domain, double t,
                                       const UniformizationOptions& options = {});

// P_t f by vector uniformization.
Eigen::VectorXd apply_semigroup(const Generator& gen, double t, const Eigen::VectorXd& f,
                                double poisson_tail = 1e-12);

// p(t, x0, .) as a vector, via P_t (e_{x0} / mu_{x0}).
Eigen::VectorXd heat_kernel_row(const Generator& gen, double t, std::size_t x0,
                                double poisson_tail = 1e-12);

// Binary matrix layout: 16-byte header (magic "HKM1", u32 N, u64
// reserved), then N*N row-major little-endian doubles.
void write_hkm1(const Eigen::MatrixXd& matrix, const std::string& path);
Eigen::MatrixXd read_hkm1(const std::string& path);

// Two-regime subordinator: Levy density s^{-1-gamma1} on (0,1] and
// s^{-1-gamma2} on (1,inf). Jumps below `cutoff` are replaced by their
// exact mean drift.
struct SubordinatorSpec {
    double gamma1 = 0.5;
    double gamma2 = 1.5;
    double cutoff = 0.0;
    double drift = 0.0;       // b(eps) = int_0^eps s nu(s) ds
    double rate_small = 0.0;  // nu mass on (cutoff, 1]
    double rate_large = 0.0;  // nu mass on (1, inf)

    // cutoff < 0 picks the default: neglected variance below 1e-6.
    static SubordinatorSpec make(double gamma1, double gamma2, double cutoff = -1.0);

    // int_0^inf s nu(s) ds = 1/(1-gamma1) + 1/(gamma2-1)
    double mean_rate() const { return 1.0 / (1.0 - gamma1) + 1.0 / (gamma2 - 1.0); }
};

// f(r) = int_0^inf (1 - e^{-rs}) nu(s) ds, evaluated by two independent
// adaptive rules that must agree to 1e-8 relative.
double laplace_exponent(const SubordinatorSpec& spec, double r);

double sample_subordinator_increment(const SubordinatorSpec& spec, double dt, RngStream& rng);

struct PathSample {
    std::vector<double> times;        // strictly increasing, times[0] = 0
    std::vector<std::size_t> states;  // states[i] entered at times[i]
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

PathSample simulate_jump_path(const Generator& gen, std::size_t start, double t_end,
                              RngStream& rng);

// Subordinate chain Y_t = X_{S_t}: the base chain evaluated at the
// subordinator's running value, sampled on a uniform dt grid.
PathSample simulate_subordinate_path(const Generator& base, const SubordinatorSpec& spec,
                                     std::size_t start, double t_end, double dt,
                                     RngStream& rng);

// Occupation estimate of p(t, x0, .) from n_paths independent paths;
// returns the density estimate and its per-cell standard error.
std::pair<Eigen::VectorXd, Eigen::VectorXd> mc_heat_kernel_row(const Generator& gen, double t,
                                                               std::size_t x0,
                                                               std::size_t n_paths,
                                                               std::uint64_t seed,
                                                               std::uint64_t stream_base);

// E^x[ tau_ball ] from the linear system (L u = -1 inside, u = 0
// outside), solved by diagonally preconditioned conjugate gradients.
double mean_exit_time(const Generator& gen, const std::vector<std::size_t>& ball,
                      std::size_t start);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

MonteCarloEstimate mean_exit_time_mc(const Generator& gen, const std::vector<std::size_t>& ball,
                                     std::size_t start, std::size_t n_paths, std::uint64_t seed,
                                     std::uint64_t stream_base);

// Relative capacity cap(A,B): minimizes the energy over potentials that
// are 1 on A and 0 outside B (harmonic extension on B \ A).
double capacity(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel,
                const std::vector<std::size_t>& inner, const std::vector<std::size_t>& outer);

// Dirichlet energy of u under the kernel (sum over ordered pairs).
double dirichlet_energy(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel,
                        const Eigen::VectorXd& u);

} // namespace jklab
