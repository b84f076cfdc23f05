#pragma once

#include <functional>
#include <optional>
#include <string>

#include "jklab/scale.hpp"

namespace jklab {

enum class Regime { NearDiagonal, SubGaussianTail, JumpTail };

const char* regime_name(Regime r);

struct RegimeLabel {
    Regime regime = Regime::NearDiagonal;
    double near_boundary = 0.0;                  // c * phi^{-1}(t)
    std::optional<double> tail_boundary;         // t_* when a crossover exists
};

struct EnvelopeConstants {
    // The default lower constant sits below exp(-1) so the unit-shape
    // lower bound stays under the upper branch at the near-diagonal
    // boundary, where the exponential factor dips to exp(-1).
    double lower_scale = 0.36;  // c1
    double lower_time = 1.0;    // c2
    double upper_scale = 1.0;   // c3
    double upper_time = 1.0;    // c4
    double nd_scale = 1.0;      // near-diagonal lower constant
    double nd_radius = 1.0;     // near-diagonal boundary multiplier
    double time_cutoff = 1.0;   // T separating the two time regimes

    void validate() const;
};

// V(x0, r) for the probe center
using VolumeFn = std::function<double(double)>;

// min( 1/V(x, phi_j^{-1}(t)), t / (V(x,d) phi_j(d)) ); d=0 keeps the
// first term.
double p_j_envelope(double t, double d, double vol_at_d, double vol_at_scale,
                    const ScaleFunction& phi_j);

// (1/V(x, phi_c^{-1}(t))) * exp( -d / bar_phi_c^{-1}(t/d) ).
double p_c_envelope(double t, double d, double vol_at_scale, const ScaleFunction& phi_c,
                    const ScaleFunction& bar_phi_c);

struct EnvelopeValue {
    double lower = 0.0;
    double upper = 0.0;
    RegimeLabel regime;
};

EnvelopeValue hk_envelope(double t, double d, const ScaleTriple& triple,
                          const EnvelopeConstants& constants, const VolumeFn& vol,
                          const CrossoverConstants& crossover = {});

// min( 1/V(x, phi^{-1}(t)), t / (V(x,d) phi(d)) ).
double coarse_upper(double t, double d, const ScaleFunction& phi, const VolumeFn& vol);

// min(1, c * t / phi(r)).
double tail_probability_bound(double t, double r, const ScaleFunction& phi, double c = 1.0);

// Scans a log-spaced (t,d) grid and reports the first point where the
// calibrated lower envelope exceeds the upper one, if any.
std::optional<std::string> envelope_calibration_check(const ScaleTriple& triple,
                                                      const EnvelopeConstants& constants,
                                                      const VolumeFn& vol, double t_min,
                                                      double t_max, double d_max,
                                                      int grid = 100);

} // namespace jklab
