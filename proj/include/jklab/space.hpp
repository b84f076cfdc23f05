#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace jklab {

// Finite metric measure space: points 0..N-1, symmetric metric, positive
// weights. Immutable after construction; all queries are const and safe
// to call concurrently.
class FiniteMetricMeasureSpace {
public:
    static constexpr std::size_t kDefaultMaxPoints = 1u << 22;

    static FiniteMetricMeasureSpace lattice_torus(int dim, int side, double spacing,
                                                  std::size_t max_points = kDefaultMaxPoints);
    static FiniteMetricMeasureSpace sierpinski_graph(int level);
    // Explicit metric matrix and weights; validates symmetry, the zero
    // diagonal and the triangle inequality.
    static FiniteMetricMeasureSpace from_points(std::vector<std::vector<double>> metric,
                                                std::vector<double> weights);

    std::size_t size() const { return n_; }
    double distance(std::size_t i, std::size_t j) const;
    double measure(std::size_t i) const { return measure_[i]; }
    double total_mass() const { return total_mass_; }
    double diameter() const { return diameter_; }
    double spacing() const { return spacing_; }

    // mu of the closed ball {y : d(x,y) <= r}; volume(x,0) = mu_x.
    double volume(std::size_t x, double r) const;
    std::vector<std::size_t> ball(std::size_t x, double r) const;

    nlohmann::json describe() const { return description_; }

    // Cumulative ball masses at one center, for O(log) volume lookups.
    struct VolumeProfile {
        std::vector<double> radii;       // unique distances, increasing
        std::vector<double> cumulative;  // mu of the closed ball at radii[i]
        double at(double r) const;
    };
    const VolumeProfile& volume_profile(std::size_t x) const;

private:
    FiniteMetricMeasureSpace() = default;

    enum class Kind { torus, graph, explicit_metric } kind_ = Kind::torus;
    std::size_t n_ = 0;
    std::vector<double> measure_;
    double total_mass_ = 0.0;
    double diameter_ = 0.0;
    double spacing_ = 1.0;
    nlohmann::json description_;

    // torus data
    int dim_ = 1;
    int side_ = 0;

    // graph data: hop distances, precomputed per source
    std::vector<std::uint16_t> hops_;  // n*n row-major

    // explicit metric
    std::vector<double> metric_;  // n*n row-major

    // torus carries one shared profile (transitivity); others one per point
    std::vector<VolumeProfile> profiles_;
    void build_profiles();

    double torus_distance(std::size_t i, std::size_t j) const;
};

// Fitted volume-doubling certificates over all points and grid pairs:
//   V(x,R)/V(x,r) <= C_mu (R/r)^{d2}   and   >= c_mu (R/r)^{d1}.
struct VolumeDoublingFit {
    double c_upper = 1.0;  // C_mu
    double d2 = 0.0;
    double c_lower = 1.0;  // c_mu
    double d1 = 0.0;
    bool pass = false;     // finite fits with d1 > 0
};

VolumeDoublingFit check_vd_rvd(const FiniteMetricMeasureSpace& space,
                               const std::vector<double>& radii);

// Heuristic midpoint-existence scan (the discrete stand-in for a chain
// condition): fraction of sampled pairs (x,y) admitting z with
// max(d(x,z), d(z,y)) <= 0.75 d(x,y).
double midpoint_scan(const FiniteMetricMeasureSpace& space, std::size_t max_pairs = 512);

} // namespace jklab
