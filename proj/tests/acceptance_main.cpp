// Acceptance suite: one routine per criterion, each printing a
// pass/fail line with the measured quantities. The process exits with
// the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "jklab/experiment.hpp"
#include "jklab/verify.hpp"

using namespace jklab;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds, double budget) {
    const bool in_budget = seconds < budget;
    if (!pass || !in_budget) ++failures;
    std::printf("[%s] criterion %2d: %-28s %s (%.1fs / budget %.0fs)\n",
                pass && in_budget ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds,
                budget);
    std::fflush(stdout);
}

ScaleFunction example_phi_j() { return ScaleFunction::piecewise_power({1.0}, {1.0, 3.0}); }
ScaleFunction example_phi() { return ScaleFunction::piecewise_power({1.0}, {1.0, 2.0}); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- 1
void laplace_sandwich() {
    Timer timer;
    const auto spec = SubordinatorSpec::make(0.5, 1.5);
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 60; ++i) {
        const double r = 1e-3 * std::pow(1e6, i / 59.0);
        const double ratio = laplace_exponent(spec, r) / std::min(std::sqrt(r), r);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    report(1, "laplace exponent sandwich", hi / lo <= 20.0,
           "f/(sqrt(r) and r) spread " + fmt(hi / lo) + " <= 20", timer.seconds(), 5);
}

// ---------------------------------------------------------------- 2
void jump_tail_integral() {
    Timer timer;
    const auto space = FiniteMetricMeasureSpace::lattice_torus(1, 4096, 1.0);
    const auto kernel = JumpKernelSpec::formula(example_phi_j());
    const std::vector<double> radii{4, 8, 16, 32, 64, 128, 256};
    const auto verdict = check_tail_integral(space, kernel, example_phi_j(), radii, 10.0);
    report(2, "jump tail integral", verdict.pass,
           "max_x phi_j(r)*tail spread " + fmt(verdict.stability) + " <= 10", timer.seconds(),
           30);
}

// ---------------------------------------------------------------- 3 + 7
void heat_kernel_criteria() {
    Timer timer;
    const auto space = FiniteMetricMeasureSpace::lattice_torus(1, 1024, 1.0);
    const Generator gen(space, JumpKernelSpec::formula(example_phi_j()));

    std::vector<HeatKernelMatrix> series;
    for (double t : {4.0, 16.0, 64.0}) series.push_back(exact_heat_kernel(gen, t));

    const auto triple = make_scale_triple(example_phi_j(), ScaleFunction::pure_power(2.0));
    auto vol = [&](double r) { return space.volume(0, r); };
    EnvelopeConstants constants;
    auto envelope = [&](double t, double d) {
        return hk_envelope(t, d, triple, constants, vol).upper;
    };
    CorridorDomain domain{0, 0.0, space.diameter() / 4.0};
    CorridorOptions options;
    options.threshold = 100.0;
    const auto good = fit_corridor(space, series, envelope, domain, options);

    // negative control: wrong diffusive exponent, probed on growing
    // distance ranges
    const auto wrong = make_scale_triple(example_phi_j(), ScaleFunction::pure_power(3.0));
    auto wrong_env = [&](double t, double d) {
        return hk_envelope(t, d, wrong, constants, vol).upper;
    };
    std::vector<double> control;
    bool growing = true;
    for (double max_d : {32.0, 64.0, 96.0, 128.0}) {
        CorridorDomain sub{0, 0.0, max_d};
        const auto fit = fit_corridor(space, series, wrong_env, sub, options);
        if (!control.empty() && fit.worst_ratio <= control.back()) growing = false;
        control.push_back(fit.worst_ratio);
    }
    std::ostringstream detail;
    detail << "good ratio " << fmt(good.worst_ratio) << " <= 100; control ratios";
    for (double c : control) detail << " " << fmt(c);
    const bool control_ok = growing && control.back() > options.threshold;
    report(3, "heat-kernel corridor", good.pass && control_ok, detail.str(), timer.seconds(),
           300);

    // ---- criterion 7 on the same kernels
    Timer timer7;
    double sym = 0.0, mass = 0.0;
    Eigen::VectorXd mu(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) mu[i] = space.measure(i);
    for (const auto& hk : series) {
        sym = std::max(sym, (hk.density - hk.density.transpose()).cwiseAbs().maxCoeff());
        mass = std::max(mass,
                        ((hk.density * mu).array() - 1.0).abs().maxCoeff());
    }
    // semigroup property at two splits
    const auto p8 = exact_heat_kernel(gen, 8.0);
    double ck = (series[0].density * mu.asDiagonal() * series[0].density - p8.density)
                    .cwiseAbs()
                    .maxCoeff();
    ck = std::max(ck, (p8.density * mu.asDiagonal() * p8.density - series[1].density)
                          .cwiseAbs()
                          .maxCoeff());
    // killed kernel sits below the full one
    const auto small_space = FiniteMetricMeasureSpace::lattice_torus(1, 256, 1.0);
    const Generator small_gen(small_space, JumpKernelSpec::formula(example_phi_j()));
    const auto full = exact_heat_kernel(small_gen, 4.0);
    const auto killed = dirichlet_heat_kernel(small_gen, small_space.ball(0, 24.0), 4.0);
    const double dir = (killed.density - full.density).maxCoeff();
    const bool pass = sym <= 1e-12 && mass <= 1e-10 && ck <= 1e-10 && dir <= 1e-12;
    report(7, "semigroup exactness",
           pass,
           "sym " + fmt(sym) + " mass " + fmt(mass) + " ck " + fmt(ck) + " dirichlet " +
               fmt(dir),
           timer7.seconds(), 300);
}

// ---------------------------------------------------------------- 4 + 5
void exit_and_capacity() {
    Timer timer;
    const auto space = FiniteMetricMeasureSpace::lattice_torus(1, 2048, 1.0);
    const auto kernel = JumpKernelSpec::formula(example_phi_j());
    const Generator gen(space, kernel);

    std::vector<std::pair<double, double>> logs;
    for (double r : {8.0, 16.0, 32.0, 64.0, 128.0}) {
        const double expected = mean_exit_time(gen, space.ball(0, r), 0);
        logs.emplace_back(std::log(r), std::log(expected));
    }
    double mr = 0, me = 0;
    for (auto [lr, le] : logs) {
        mr += lr;
        me += le;
    }
    mr /= logs.size();
    me /= logs.size();
    double num = 0, den = 0;
    for (auto [lr, le] : logs) {
        num += (lr - mr) * (le - me);
        den += (lr - mr) * (lr - mr);
    }
    const double slope = num / den;

    bool mc_ok = true;
    std::ostringstream mc_detail;
    int stream = 1;
    for (double r : {8.0, 32.0}) {
        const auto ball = space.ball(0, r);
        const double solved = mean_exit_time(gen, ball, 0);
        const auto mc = mean_exit_time_mc(gen, ball, 0, 10000, 90210, 1000 * stream++);
        const double z = std::abs(solved - mc.mean) / mc.std_error;
        mc_ok = mc_ok && z <= 3.0;
        mc_detail << " r=" << r << " z=" << fmt(z);
    }
    report(4, "exit-time scaling", std::abs(slope - 2.0) <= 0.3 && mc_ok,
           "slope " + fmt(slope) + " in 2+-0.3;" + mc_detail.str(), timer.seconds(), 120);

    Timer timer5;
    double lo = 1e300, hi = -1e300;
    const auto phi = example_phi();
    for (double r : {4.0, 8.0, 16.0, 32.0, 64.0}) {
        const double cap = capacity(space, kernel, space.ball(0, r), space.ball(0, 2.0 * r));
        const double normalized = cap * phi.eval(r) / space.volume(0, r);
        lo = std::min(lo, normalized);
        hi = std::max(hi, normalized);
    }
    report(5, "capacity scaling", hi / lo <= 10.0,
           "cap*phi/V spread " + fmt(hi / lo) + " <= 10", timer5.seconds(), 60);
}

// ---------------------------------------------------------------- 6
void fk_and_pi() {
    Timer timer;
    const auto space = FiniteMetricMeasureSpace::lattice_torus(1, 1024, 1.0);
    const Generator gen(space, JumpKernelSpec::formula(example_phi_j()));
    const auto phi = example_phi();
    const std::vector<double> radii{4, 8, 16, 32};

    const auto fk = check_faber_krahn(gen, 0, radii, phi, 10.0);
    const auto pi = check_poincare(gen, 0, radii, phi, 2.0, 10.0);

    // dense generalized eigendecomposition oracle on subsets below 200
    double worst_gap = 0.0;
    for (double r : {4.0, 20.0, 90.0}) {
        const auto ball = space.ball(0, r);
        const std::size_t m = ball.size();
        Eigen::MatrixXd a(m, m);
        Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            mass(i, i) = space.measure(ball[i]);
            for (std::size_t j = 0; j < m; ++j)
                a(i, j) = -space.measure(ball[i]) * gen.rates()(ball[i], ball[j]);
        }
        a = 0.5 * (a + a.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, mass);
        const double oracle = solver.eigenvalues().minCoeff();
        const double mine = smallest_dirichlet_eigenvalue(gen, ball);
        worst_gap = std::max(worst_gap, std::abs(mine - oracle) / oracle);
    }
    const bool pass = fk.pass && pi.pass && worst_gap <= 1e-8;
    report(6, "faber-krahn and poincare", pass,
           "fk spread " + fmt(fk.stability) + ", pi spread " + fmt(pi.stability) +
               ", oracle gap " + fmt(worst_gap),
           timer.seconds(), 120);
}

// ---------------------------------------------------------------- 8
void phi_harnack_coupling() {
    Timer timer;
    const auto space = FiniteMetricMeasureSpace::lattice_torus(1, 1024, 1.0);
    const auto phi = example_phi();
    const std::vector<double> radii{4, 8, 16};
    const Generator base(space, JumpKernelSpec::formula(example_phi_j()));
    const auto good = check_phi_harnack(base, phi, 0, radii, HarnackCylinder{}, 2026, 3.0);

    auto mod = [](std::size_t x, std::size_t y, double d) {
        if (d < 8.0) return 1.0;
        return (x % 64 == 0 && y % 64 == 0) ? 1.0 : 0.0;
    };
    const Generator broken(space,
                           JumpKernelSpec::formula(example_phi_j(), mod, 0.0, 1.0));
    const auto bad =
        check_phi_harnack(broken, phi, 0, radii, HarnackCylinder{}, 2026, 1e300);
    bool growing = true;
    for (std::size_t i = 1; i < bad.per_scale.size(); ++i)
        growing = growing && bad.per_scale[i].second > bad.per_scale[i - 1].second;
    double band = 0.0;
    for (auto [r, ratio] : good.per_scale) band = std::max(band, ratio);
    const bool control = growing && bad.constants.at("worst_harnack_ratio") > band;
    std::ostringstream detail;
    detail << "base spread " << fmt(good.stability) << " <= 3; control";
    for (auto [r, ratio] : bad.per_scale) detail << " " << fmt(ratio);
    detail << " vs band " << fmt(band);
    report(8, "harnack / ujs coupling", good.pass && control, detail.str(), timer.seconds(),
           300);
}

// ---------------------------------------------------------------- 9
void diffusive_scale_construction() {
    Timer timer;
    bool closed_form_ok = true;
    double worst = 0.0;
    const auto pure = ScaleFunction::pure_power(0.5);
    for (int i = 0; i < 40; ++i) {
        const double r = 1e-2 * std::pow(1e4, i / 39.0);
        const double quadrature = induced_diffusive_scale(pure, r);
        const double closed = 0.75 * std::sqrt(r);
        const double err = std::abs(quadrature - closed) / closed;
        worst = std::max(worst, err);
        closed_form_ok = closed_form_ok && err <= 1e-8;
    }
    const auto mixed = ScaleFunction::piecewise_power({1.0}, {0.5, 2.0});
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= 24; ++i) {
        const double r = 10.0 * std::pow(1e3, i / 24.0);
        const double v = induced_diffusive_scale(mixed, r) * std::log1p(r) / (r * r);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    report(9, "diffusive scale constructor", closed_form_ok && hi / lo <= 5.0,
           "closed-form err " + fmt(worst) + ", tail spread " + fmt(hi / lo) + " <= 5",
           timer.seconds(), 60);
}

// ---------------------------------------------------------------- 10
void determinism() {
    Timer timer;
    namespace fs = std::filesystem;
    const fs::path tmp = fs::temp_directory_path() / "jklab_acceptance_det";
    fs::remove_all(tmp);
    auto cfg = ExperimentConfig::from_json(builtin_experiment("example_1_1"));
    const auto a = run_experiment(cfg, 2);
    write_run_outputs(a, cfg, (tmp / "a").string());
    const auto b = run_experiment(cfg, 1);
    write_run_outputs(b, cfg, (tmp / "b").string());
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };
    const std::string sa = slurp(tmp / "a" / "summary.json");
    const std::string sb = slurp(tmp / "b" / "summary.json");
    const bool all_pass = a.all_pass();
    fs::remove_all(tmp);
    report(10, "determinism of example_1_1", !sa.empty() && sa == sb && all_pass,
           std::string("summaries ") + (sa == sb ? "byte-identical" : "differ") +
               (all_pass ? ", all verdicts pass" : ", some verdicts FAILED"),
           timer.seconds(), 300);
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    laplace_sandwich();
    jump_tail_integral();
    heat_kernel_criteria();
    exit_and_capacity();
    fk_and_pi();
    phi_harnack_coupling();
    diffusive_scale_construction();
    determinism();
    std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
