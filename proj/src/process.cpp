#include "jklab/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>

#include "jklab/quadrature.hpp"

namespace jklab {

// ---------------------------------------------------------------------------
// JumpKernelSpec

JumpKernelSpec JumpKernelSpec::formula(ScaleFunction phi_j, Modulator modulator,
                                       double kappa_low, double kappa_up) {
    if (!(kappa_low >= 0.0) || !(kappa_up >= kappa_low) || !(kappa_up > 0.0))
        throw std::invalid_argument("kernel: need 0 <= kappa_low <= kappa_up with kappa_up > 0");
    JumpKernelSpec k;
    k.kind_ = Kind::formula;
    k.phi_j_ = std::move(phi_j);
    k.modulator_ = std::move(modulator);
    k.kappa_low_ = kappa_low;
    k.kappa_up_ = kappa_up;
    return k;
}

JumpKernelSpec JumpKernelSpec::explicit_matrix(Eigen::MatrixXd rates) {
    const auto n = rates.rows();
    if (rates.cols() != n) throw std::invalid_argument("kernel: matrix must be square");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (rates(i, i) != 0.0) throw std::invalid_argument("kernel: diagonal must be zero");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (rates(i, j) < 0.0) throw std::invalid_argument("kernel: negative rate");
            if (std::abs(rates(i, j) - rates(j, i)) >
                1e-12 * std::max(1.0, std::abs(rates(i, j))))
                throw std::invalid_argument("kernel: matrix not symmetric");
        }
    }
    JumpKernelSpec k;
    k.kind_ = Kind::matrix;
    k.matrix_ = std::move(rates);
    return k;
}

const ScaleFunction& JumpKernelSpec::phi_j() const {
    if (kind_ != Kind::formula)
        throw std::logic_error("kernel: explicit matrices carry no phi_j");
    return phi_j_;
}

JumpKernelSpec JumpKernelSpec::truncated(double rho) const {
    if (!(rho > 0.0)) throw std::invalid_argument("truncate_kernel: rho must be > 0");
    JumpKernelSpec k = *this;
    k.rho_ = rho_ ? std::min(*rho_, rho) : rho;
    return k;
}

std::vector<double> JumpKernelSpec::row(const FiniteMetricMeasureSpace& space,
                                        std::size_t x) const {
    const std::size_t n = space.size();
    std::vector<double> out(n, 0.0);
    if (kind_ == Kind::matrix) {
        if (matrix_.rows() != static_cast<Eigen::Index>(n))
            throw std::invalid_argument("kernel: matrix size does not match the space");
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            if (rho_ && space.distance(x, y) > *rho_) continue;
            out[y] = matrix_(x, y);
        }
        return out;
    }
    // Profile form with the symmetric volume mean: the one-sided ball
    // mass V(x,d) is not symmetric on inhomogeneous spaces, while
    // sqrt(V(x,d) V(y,d)) is, agrees with it on transitive spaces, and
    // stays comparable to it under volume doubling.
    const auto& mine = space.volume_profile(x);
    for (std::size_t y = 0; y < n; ++y) {
        if (y == x) continue;
        const double d = space.distance(x, y);
        if (rho_ && d > *rho_) continue;
        const double a = modulator_ ? modulator_(x, y, d) : 1.0;
        if (a < kappa_low_ - 1e-12 || a > kappa_up_ + 1e-12)
            throw std::invalid_argument("kernel: modulator outside [kappa_low,kappa_up]");
        if (a <= 0.0) continue;
        const double vol = std::sqrt(mine.at(d) * space.volume_profile(y).at(d));
        out[y] = a / (vol * phi_j_.eval(d));
    }
    return out;
}

double JumpKernelSpec::rate(const FiniteMetricMeasureSpace& space, std::size_t x,
                            std::size_t y) const {
    if (x == y) return 0.0;
    const double d = space.distance(x, y);
    if (rho_ && d > *rho_) return 0.0;
    if (kind_ == Kind::matrix) return matrix_(x, y);
    const double a = modulator_ ? modulator_(x, y, d) : 1.0;
    if (a <= 0.0) return 0.0;
    const double vol = std::sqrt(space.volume(x, d) * space.volume(y, d));
    return a / (vol * phi_j_.eval(d));
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel)
    : space_(&space) {
    const std::size_t n = space.size();
    rates_.resize(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        const auto row = kernel.row(space, x);
        double total = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            const double q = row[y] * space.measure(y);
            if (!(q >= 0.0) || !std::isfinite(q))
                throw std::invalid_argument("generator: invalid rate");
            rates_(x, y) = q;
            total += q;
        }
        rates_(x, x) = -total;
        lambda_ = std::max(lambda_, total);
    }
    // detailed balance: mu_x q_xy == mu_y q_yx
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y) {
            const double a = space.measure(x) * rates_(x, y);
            const double b = space.measure(y) * rates_(y, x);
            if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
                throw std::invalid_argument("generator: kernel is not symmetric in the mu sense");
        }
}

std::size_t Generator::sample_jump(std::size_t x, double u) const {
    std::call_once(cdf_once_, [&] {
        const std::size_t n = space_->size();
        row_cdf_.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            auto& cdf = row_cdf_[i];
            cdf.resize(n);
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) acc += rates_(i, j);
                cdf[j] = acc;
            }
        }
    });
    const auto& cdf = row_cdf_[x];
    const double target = u * cdf.back();
    return std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
}

// ---------------------------------------------------------------------------
// Uniformization

namespace {

// Poisson(lambda) weights w_0..w_K with tail below `tail`, computed in
// log space around the mode so large lambda cannot underflow.
std::vector<double> poisson_weights(double lambda, double tail) {
    if (lambda <= 0.0) return {1.0};
    std::size_t cap = static_cast<std::size_t>(lambda + 12.0 * std::sqrt(lambda) + 60.0);
    std::vector<double> w(cap + 1);
    double cum = 0.0;
    std::size_t k_stop = cap;
    for (std::size_t k = 0; k <= cap; ++k) {
        const double lw = -lambda + k * std::log(lambda) - std::lgamma(double(k) + 1.0);
        w[k] = std::exp(lw);
        cum += w[k];
        if (1.0 - cum < tail) {
            k_stop = k;
            break;
        }
    }
    if (1.0 - cum >= tail)
        throw std::runtime_error("uniformization: Poisson tail did not reach the tolerance");
    w.resize(k_stop + 1);
    return w;
}

Eigen::MatrixXd uniformized_transition(const Eigen::MatrixXd& rates, double lambda) {
    Eigen::MatrixXd s = rates / lambda;
    s.diagonal().array() += 1.0;
    return s;
}

} // namespace

HeatKernelMatrix exact_heat_kernel(const Generator& gen, double t,
                                   const UniformizationOptions& options) {
    const auto& space = gen.space();
    const std::size_t n = space.size();
    if (n > options.max_points)
        throw std::length_error("exact_heat_kernel: point count above the configured cap");
    if (t < 0.0) throw std::domain_error("exact_heat_kernel: t must be >= 0");

    const double lambda = gen.uniformization_rate();
    HeatKernelMatrix out;
    out.time = t;
    Eigen::MatrixXd transition;
    if (lambda * t == 0.0) {
        transition = Eigen::MatrixXd::Identity(n, n);
    } else {
        const auto w = poisson_weights(lambda * t, options.poisson_tail);
        const Eigen::MatrixXd s = uniformized_transition(gen.rates(), lambda);
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
        transition = w[0] * power;
        Eigen::MatrixXd next(n, n);
        for (std::size_t k = 1; k < w.size(); ++k) {
            next.noalias() = power * s;
            power.swap(next);
            transition.noalias() += w[k] * power;
        }
    }
    out.density = std::move(transition);
    for (std::size_t y = 0; y < n; ++y) out.density.col(y) /= space.measure(y);
    return out;
}

HeatKernelMatrix dirichlet_heat_kernel(const Generator& gen,
                                       const std::vector<std::size_t>& domain, double t,
                                       const UniformizationOptions& options) {
    if (domain.empty()) throw std::invalid_argument("dirichlet_heat_kernel: empty domain");
    if (t < 0.0) throw std::domain_error("dirichlet_heat_kernel: t must be >= 0");
    const auto& space = gen.space();
    const std::size_t n = space.size();
    const std::size_t m = domain.size();

    Eigen::MatrixXd sub(m, m);
    double lambda = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) sub(a, b) = gen.rates()(domain[a], domain[b]);
        lambda = std::max(lambda, gen.escape_rate(domain[a]));
    }

    Eigen::MatrixXd transition;
    if (lambda * t == 0.0) {
        transition = Eigen::MatrixXd::Identity(m, m);
    } else {
        const auto w = poisson_weights(lambda * t, options.poisson_tail);
        const Eigen::MatrixXd s = uniformized_transition(sub, lambda);
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m, m);
        transition = w[0] * power;
        Eigen::MatrixXd next(m, m);
        for (std::size_t k = 1; k < w.size(); ++k) {
            next.noalias() = power * s;
            power.swap(next);
            transition.noalias() += w[k] * power;
        }
    }

    HeatKernelMatrix out;
    out.time = t;
    out.density = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            out.density(domain[a], domain[b]) = transition(a, b) / space.measure(domain[b]);
    return out;
}

Eigen::VectorXd apply_semigroup(const Generator& gen, double t, const Eigen::VectorXd& f,
                                double poisson_tail) {
    if (t < 0.0) throw std::domain_error("apply_semigroup: t must be >= 0");
    const double lambda = gen.uniformization_rate();
    if (lambda * t == 0.0) return f;
    const auto w = poisson_weights(lambda * t, poisson_tail);
    Eigen::VectorXd cur = f;
    Eigen::VectorXd acc = w[0] * cur;
    Eigen::VectorXd next(f.size());
    for (std::size_t k = 1; k < w.size(); ++k) {
        next.noalias() = gen.rates() * cur;
        next /= lambda;
        next += cur;
        cur.swap(next);
        acc.noalias() += w[k] * cur;
    }
    return acc;
}

Eigen::VectorXd heat_kernel_row(const Generator& gen, double t, std::size_t x0,
                                double poisson_tail) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(gen.space().size());
    f[x0] = 1.0 / gen.space().measure(x0);
    return apply_semigroup(gen, t, f, poisson_tail);
}

// ---------------------------------------------------------------------------
// HKM1 binary layout

void write_hkm1(const Eigen::MatrixXd& matrix, const std::string& path) {
    if (matrix.rows() != matrix.cols())
        throw std::invalid_argument("write_hkm1: matrix must be square");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_hkm1: cannot open " + path);
    const char magic[4] = {'H', 'K', 'M', '1'};
    const std::uint32_t n = static_cast<std::uint32_t>(matrix.rows());
    const std::uint64_t reserved = 0;
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 8);
    std::vector<double> row(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) row[j] = matrix(i, j);
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(8) * n);
    }
    if (!out) throw std::runtime_error("write_hkm1: short write to " + path);
}

Eigen::MatrixXd read_hkm1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_hkm1: cannot open " + path);
    char magic[4];
    std::uint32_t n = 0;
    std::uint64_t reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&reserved), 8);
    if (!in || std::memcmp(magic, "HKM1", 4) != 0)
        throw std::runtime_error("read_hkm1: bad header in " + path);
    Eigen::MatrixXd m(n, n);
    std::vector<double> row(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(8) * n);
        for (std::uint32_t j = 0; j < n; ++j) m(i, j) = row[j];
    }
    if (!in) throw std::runtime_error("read_hkm1: truncated file " + path);
    return m;
}

// ---------------------------------------------------------------------------
// Subordinator

SubordinatorSpec SubordinatorSpec::make(double gamma1, double gamma2, double cutoff) {
    if (!(gamma1 > 0.0 && gamma1 < 1.0))
        throw std::invalid_argument("subordinator: gamma1 must lie in (0,1)");
    if (!(gamma2 > 1.0)) throw std::invalid_argument("subordinator: gamma2 must be > 1");
    SubordinatorSpec s;
    s.gamma1 = gamma1;
    s.gamma2 = gamma2;
    if (cutoff < 0.0) {
        // neglected variance int_0^eps s^2 nu = eps^{2-g1}/(2-g1) below 1e-6
        s.cutoff = std::pow(1e-6 * (2.0 - gamma1), 1.0 / (2.0 - gamma1));
    } else {
        if (!(cutoff > 0.0 && cutoff <= 1.0))
            throw std::invalid_argument("subordinator: cutoff must lie in (0,1]");
        s.cutoff = cutoff;
    }
    s.drift = std::pow(s.cutoff, 1.0 - gamma1) / (1.0 - gamma1);
    s.rate_small = (std::pow(s.cutoff, -gamma1) - 1.0) / gamma1;
    s.rate_large = 1.0 / gamma2;
    return s;
}

namespace {

// One integration rule for the Laplace exponent; `use_gk` switches the
// panel integrator so the two routes stay independent.
double laplace_exponent_one_rule(const SubordinatorSpec& spec, double r, bool use_gk) {
    const double g1 = spec.gamma1, g2 = spec.gamma2;
    // series on (0,delta]: (1-e^{-rs}) s^{-1-g1}, rs <= 1e-3
    const double delta = std::min(1.0, 1e-3 / r);
    double value = 0.0;
    double term_sign = 1.0, r_pow = r, factorial = 1.0;
    for (int k = 1; k <= 6; ++k) {
        value += term_sign * r_pow / (factorial * (k - g1)) * std::pow(delta, k - g1);
        term_sign = -term_sign;
        r_pow *= r;
        factorial *= k + 1;
    }
    auto piece = [&](const std::function<double(double)>& f, double a, double b) {
        if (b <= a) return 0.0;
        auto res = use_gk ? integrate_gk(f, a, b, 1e-11) : integrate_simpson(f, a, b, 1e-11);
        if (!res.converged)
            throw std::runtime_error("laplace_exponent: quadrature did not converge");
        return res.value;
    };
    auto small_seg = [&](double s) { return (1.0 - std::exp(-r * s)) * std::pow(s, -1.0 - g1); };
    auto large_seg = [&](double s) { return (1.0 - std::exp(-r * s)) * std::pow(s, -1.0 - g2); };
    // split points at 1 and 1/r
    if (delta < 1.0) {
        const double inv_r = 1.0 / r;
        if (inv_r > delta && inv_r < 1.0) {
            value += piece(small_seg, delta, inv_r);
            value += piece(small_seg, inv_r, 1.0);
        } else {
            value += piece(small_seg, delta, 1.0);
        }
    }
    // (1, A] with analytic remainder beyond A; the dropped factor
    // e^{-rs} is below e^{-50} there.
    const double a_cut = std::max({2.0, 50.0 / r, 1.0});
    const double inv_r = 1.0 / r;
    if (inv_r > 1.0 && inv_r < a_cut) {
        value += piece(large_seg, 1.0, inv_r);
        value += piece(large_seg, inv_r, a_cut);
    } else {
        value += piece(large_seg, 1.0, a_cut);
    }
    value += std::pow(a_cut, -g2) / g2;
    return value;
}

} // namespace

double laplace_exponent(const SubordinatorSpec& spec, double r) {
    if (r < 0.0) throw std::domain_error("laplace_exponent: r must be >= 0");
    if (r == 0.0) return 0.0;
    const double a = laplace_exponent_one_rule(spec, r, true);
    const double b = laplace_exponent_one_rule(spec, r, false);
    if (std::abs(a - b) > 1e-8 * std::max(std::abs(a), std::abs(b)))
        throw std::runtime_error("laplace_exponent: quadrature rules disagree at r=" +
                                 std::to_string(r));
    return a;
}

double sample_subordinator_increment(const SubordinatorSpec& spec, double dt, RngStream& rng) {
    if (!(dt > 0.0)) throw std::domain_error("subordinator increment: dt must be > 0");
    double total = spec.drift * dt;
    const double lambda = (spec.rate_small + spec.rate_large) * dt;
    const double p_small = spec.rate_small / (spec.rate_small + spec.rate_large);
    // Poisson(lambda) arrivals via exponential interarrival times
    double clock = rng.next_exponential(1.0);
    while (clock <= lambda) {
        const double u = rng.next_unit();
        const double v = rng.next_unit();
        double jump;
        if (u < p_small) {
            const double lo = std::pow(spec.cutoff, -spec.gamma1);
            jump = std::pow(lo - v * (lo - 1.0), -1.0 / spec.gamma1);
        } else {
            jump = std::pow(1.0 - v, -1.0 / spec.gamma2);
        }
        total += jump;
        clock += rng.next_exponential(1.0);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Paths

PathSample simulate_jump_path(const Generator& gen, std::size_t start, double t_end,
                              RngStream& rng) {
    if (!(t_end > 0.0)) throw std::domain_error("simulate_jump_path: t_end must be > 0");
    PathSample path;
    path.seed = rng.seed();
    path.stream = rng.stream();
    path.times.push_back(0.0);
    path.states.push_back(start);
    double t = 0.0;
    std::size_t x = start;
    while (true) {
        const double rate = gen.escape_rate(x);
        if (rate <= 0.0) break;
        t += rng.next_exponential(rate);
        if (t >= t_end) break;
        x = gen.sample_jump(x, rng.next_unit());
        path.times.push_back(t);
        path.states.push_back(x);
    }
    return path;
}

PathSample simulate_subordinate_path(const Generator& base, const SubordinatorSpec& spec,
                                     std::size_t start, double t_end, double dt,
                                     RngStream& rng) {
    if (!(dt > 0.0)) throw std::domain_error("simulate_subordinate_path: dt must be > 0");
    PathSample out;
    out.seed = rng.seed();
    out.stream = rng.stream();
    out.times.push_back(0.0);
    out.states.push_back(start);

    // lazily extended base path
    std::vector<double> base_times{0.0};
    std::vector<std::size_t> base_states{start};
    double base_clock = 0.0;
    std::size_t base_state = start;
    auto extend_base_to = [&](double s) {
        while (base_clock < s) {
            const double rate = base.escape_rate(base_state);
            if (rate <= 0.0) {
                base_clock = s;
                break;
            }
            base_clock += rng.next_exponential(rate);
            if (base_clock >= s && base_times.size() > 1e9) break;
            base_state = base.sample_jump(base_state, rng.next_unit());
            base_times.push_back(base_clock);
            base_states.push_back(base_state);
        }
    };
    auto state_at = [&](double s) {
        const auto it = std::upper_bound(base_times.begin(), base_times.end(), s);
        return base_states[(it - base_times.begin()) - 1];
    };

    double s_val = 0.0;
    for (double t = dt; t <= t_end + 1e-12; t += dt) {
        s_val += sample_subordinator_increment(spec, dt, rng);
        extend_base_to(s_val);
        out.times.push_back(t);
        out.states.push_back(state_at(s_val));
    }
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mc_heat_kernel_row(const Generator& gen, double t,
                                                               std::size_t x0,
                                                               std::size_t n_paths,
                                                               std::uint64_t seed,
                                                               std::uint64_t stream_base) {
    const std::size_t n = gen.space().size();
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        RngStream rng(seed, stream_base + p);
        const auto path = simulate_jump_path(gen, x0, t, rng);
        ++counts[path.states.back()];
    }
    Eigen::VectorXd density(n), err(n);
    for (std::size_t y = 0; y < n; ++y) {
        const double q = static_cast<double>(counts[y]) / static_cast<double>(n_paths);
        density[y] = q / gen.space().measure(y);
        err[y] = std::sqrt(q * (1.0 - q) / static_cast<double>(n_paths)) / gen.space().measure(y);
    }
    return {density, err};
}

// ---------------------------------------------------------------------------
// Exit times and capacity

namespace {

// Dirichlet form matrix restricted to `dom`: A = -(D_mu Q)|_dom, which is
// symmetric positive definite whenever something escapes.
Eigen::MatrixXd restricted_form_matrix(const Generator& gen,
                                       const std::vector<std::size_t>& dom) {
    const std::size_t m = dom.size();
    Eigen::MatrixXd a(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            a(i, j) = -gen.space().measure(dom[i]) * gen.rates()(dom[i], dom[j]);
    return a;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(20000);
    cg.compute(a);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success)
        throw std::runtime_error("conjugate gradient did not converge");
    return x;
}

} // namespace

double mean_exit_time(const Generator& gen, const std::vector<std::size_t>& ball,
                      std::size_t start) {
    if (ball.empty()) throw std::invalid_argument("mean_exit_time: empty ball");
    const auto pos = std::find(ball.begin(), ball.end(), start);
    if (pos == ball.end()) throw std::invalid_argument("mean_exit_time: start not in ball");
    if (ball.size() >= gen.space().size())
        throw std::invalid_argument("mean_exit_time: ball must be a proper subset");
    Eigen::MatrixXd a = restricted_form_matrix(gen, ball);
    Eigen::VectorXd b(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) b[i] = gen.space().measure(ball[i]);
    const Eigen::VectorXd u = solve_spd(a, b);
    return u[pos - ball.begin()];
}

MonteCarloEstimate mean_exit_time_mc(const Generator& gen, const std::vector<std::size_t>& ball,
                                     std::size_t start, std::size_t n_paths, std::uint64_t seed,
                                     std::uint64_t stream_base) {
    std::vector<char> inside(gen.space().size(), 0);
    for (auto i : ball) inside[i] = 1;
    if (!inside[start]) throw std::invalid_argument("mean_exit_time_mc: start not in ball");
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        RngStream rng(seed, stream_base + p);
        double t = 0.0;
        std::size_t x = start;
        while (inside[x]) {
            t += rng.next_exponential(gen.escape_rate(x));
            x = gen.sample_jump(x, rng.next_unit());
        }
        sum += t;
        sum_sq += t * t;
    }
    MonteCarloEstimate est;
    est.n = n_paths;
    est.mean = sum / static_cast<double>(n_paths);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(n_paths) - est.mean * est.mean);
    est.std_error = std::sqrt(var / static_cast<double>(n_paths));
    return est;
}

double capacity(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel,
                const std::vector<std::size_t>& inner, const std::vector<std::size_t>& outer) {
    const std::size_t n = space.size();
    if (inner.empty()) throw std::invalid_argument("capacity: inner set is empty");
    std::vector<char> in_a(n, 0), in_b(n, 0);
    for (auto i : inner) in_a[i] = 1;
    for (auto i : outer) in_b[i] = 1;
    for (auto i : inner)
        if (!in_b[i]) throw std::invalid_argument("capacity: inner set must lie inside outer");
    if (outer.size() >= n)
        throw std::invalid_argument("capacity: outer set must have a nonempty complement");

    std::vector<std::size_t> free;  // B \ A
    for (auto i : outer)
        if (!in_a[i]) free.push_back(i);

    // potential: 1 on A, harmonic on B\A, 0 outside B
    Eigen::VectorXd potential = Eigen::VectorXd::Zero(n);
    for (auto i : inner) potential[i] = 1.0;

    if (!free.empty()) {
        const std::size_t m = free.size();
        std::vector<std::ptrdiff_t> pos(n, -1);
        for (std::size_t i = 0; i < m; ++i) pos[free[i]] = static_cast<std::ptrdiff_t>(i);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t w = free[i];
            const auto row = kernel.row(space, w);
            double degree = 0.0;
            for (std::size_t y = 0; y < n; ++y) {
                const double q = row[y] * space.measure(y);
                degree += q;
                if (pos[y] >= 0)
                    a(i, pos[y]) -= space.measure(w) * q;
                else if (in_a[y])
                    b[i] += space.measure(w) * q;
            }
            a(i, i) += space.measure(w) * degree;
        }
        const Eigen::VectorXd u = solve_spd(a, b);
        for (std::size_t i = 0; i < m; ++i) potential[free[i]] = u[i];
    }

    // Energy over ordered pairs. The x-loop over B covers every ordered
    // pair with first coordinate in B; pairs (x outside B, y in B) equal
    // their mirrored (y,x) term by symmetry, which is the second sum.
    double energy = 0.0;
    for (auto x : outer) {
        const auto row = kernel.row(space, x);
        for (std::size_t y = 0; y < n; ++y) {
            const double diff = potential[x] - potential[y];
            energy += diff * diff * row[y] * space.measure(x) * space.measure(y);
            if (!in_b[y])
                energy += potential[x] * potential[x] * row[y] * space.measure(x) *
                          space.measure(y);
        }
    }
    return energy;
}

double dirichlet_energy(const FiniteMetricMeasureSpace& space, const JumpKernelSpec& kernel,
                        const Eigen::VectorXd& u) {
    const std::size_t n = space.size();
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const auto row = kernel.row(space, x);
        for (std::size_t y = 0; y < n; ++y) {
            const double diff = u[x] - u[y];
            acc += diff * diff * row[y] * space.measure(x) * space.measure(y);
        }
    }
    return acc;
}

} // namespace jklab
