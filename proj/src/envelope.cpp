#include "jklab/envelope.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace jklab {

const char* regime_name(Regime r) {
    switch (r) {
    case Regime::NearDiagonal: return "NearDiagonal";
    case Regime::SubGaussianTail: return "SubGaussianTail";
    case Regime::JumpTail: return "JumpTail";
    }
    return "?";
}

void EnvelopeConstants::validate() const {
    if (!(lower_scale > 0 && lower_time > 0 && upper_scale > 0 && upper_time > 0 &&
          nd_scale > 0 && nd_radius > 0 && time_cutoff > 0))
        throw std::invalid_argument("envelope constants must all be positive");
    if (!(lower_time <= upper_time))
        throw std::invalid_argument("envelope constants: need lower_time <= upper_time");
}

double p_j_envelope(double t, double d, double vol_at_d, double vol_at_scale,
                    const ScaleFunction& phi_j) {
    if (!(t > 0)) throw std::domain_error("p_j_envelope: t must be > 0");
    if (d < 0) throw std::domain_error("p_j_envelope: d must be >= 0");
    if (!(vol_at_scale > 0)) throw std::domain_error("p_j_envelope: volumes must be > 0");
    const double near = 1.0 / vol_at_scale;
    if (d == 0.0) return near;
    if (!(vol_at_d > 0)) throw std::domain_error("p_j_envelope: volumes must be > 0");
    const double far = t / (vol_at_d * phi_j.eval(d));
    return std::min(near, far);
}

double p_c_envelope(double t, double d, double vol_at_scale, const ScaleFunction& phi_c,
                    const ScaleFunction& bar_phi_c) {
    if (!(t > 0)) throw std::domain_error("p_c_envelope: t must be > 0");
    if (d < 0) throw std::domain_error("p_c_envelope: d must be >= 0");
    (void)phi_c;
    const double near = 1.0 / vol_at_scale;
    if (d == 0.0) return near;
    const double exponent = d / bar_phi_c.invert(t / d);
    if (exponent > 700.0) return 0.0;  // below double-precision underflow
    return near * std::exp(-exponent);
}

namespace {

// Upper branch shape at dilated time s: the two-sided estimate's upper
// expression with unit constants.
double upper_shape(double s, double d, const ScaleTriple& triple, const VolumeFn& vol,
                   bool diffusive_side) {
    const double vj = vol(triple.phi_j.invert(s));
    const double vd = d > 0 ? vol(d) : vj;
    const double pj = p_j_envelope(s, d, vd, vj, triple.phi_j);
    if (!diffusive_side) return pj;
    const double vc = vol(triple.phi_c.invert(s));
    const double pc = p_c_envelope(s, d, vc, triple.phi_c, triple.bar_phi_c_or_throw());
    return std::min(1.0 / vc, pc + pj);
}

// Explicit lower-bound shape: p_j below the time cutoff side collapse,
// otherwise the two-case near-diagonal / jump-tail expression.
double lower_shape(double s, double d, const ScaleTriple& triple, const VolumeFn& vol,
                   bool diffusive_side, double nd_scale, double nd_radius) {
    if (!diffusive_side) {
        const double vj = vol(triple.phi_j.invert(s));
        const double vd = d > 0 ? vol(d) : vj;
        return p_j_envelope(s, d, vd, vj, triple.phi_j);
    }
    const double rc = triple.phi_c.invert(s);
    if (d <= nd_radius * rc) return nd_scale / vol(rc);
    return s / (vol(d) * triple.phi_j.eval(d));
}

} // namespace

EnvelopeValue hk_envelope(double t, double d, const ScaleTriple& triple,
                          const EnvelopeConstants& constants, const VolumeFn& vol,
                          const CrossoverConstants& crossover) {
    if (!(t > 0)) throw std::domain_error("hk_envelope: t must be > 0");
    if (d < 0) throw std::domain_error("hk_envelope: d must be >= 0");
    constants.validate();

    const bool small_side = t <= constants.time_cutoff;
    const bool diffusive =
        small_side ? triple.small_side_diffusive() : triple.large_side_diffusive();

    EnvelopeValue out;
    out.upper = constants.upper_scale *
                upper_shape(constants.upper_time * t, d, triple, vol, diffusive);
    out.lower = constants.lower_scale *
                lower_shape(constants.lower_time * t, d, triple, vol, diffusive,
                            constants.nd_scale, constants.nd_radius);

    const ScaleFunction& near_scale = diffusive ? triple.phi_c : triple.phi_j;
    out.regime.near_boundary = constants.nd_radius * near_scale.invert(t);
    if (diffusive && t >= 1.0) {
        const auto cross = crossover_radius(triple.phi_j, triple.phi_c, t, crossover);
        if (cross.found) out.regime.tail_boundary = cross.r_star;
    }
    if (d <= out.regime.near_boundary)
        out.regime.regime = Regime::NearDiagonal;
    else if (out.regime.tail_boundary && d < *out.regime.tail_boundary)
        out.regime.regime = Regime::SubGaussianTail;
    else
        out.regime.regime = Regime::JumpTail;
    return out;
}

double coarse_upper(double t, double d, const ScaleFunction& phi, const VolumeFn& vol) {
    if (!(t > 0)) throw std::domain_error("coarse_upper: t must be > 0");
    if (d < 0) throw std::domain_error("coarse_upper: d must be >= 0");
    const double near = 1.0 / vol(phi.invert(t));
    if (d == 0.0) return near;
    return std::min(near, t / (vol(d) * phi.eval(d)));
}

double tail_probability_bound(double t, double r, const ScaleFunction& phi, double c) {
    if (!(t > 0 && r > 0)) throw std::domain_error("tail_probability_bound: t,r must be > 0");
    return std::min(1.0, c * t / phi.eval(r));
}

std::optional<std::string> envelope_calibration_check(const ScaleTriple& triple,
                                                      const EnvelopeConstants& constants,
                                                      const VolumeFn& vol, double t_min,
                                                      double t_max, double d_max, int grid) {
    for (int i = 0; i < grid; ++i) {
        const double t = t_min * std::pow(t_max / t_min, (i + 0.5) / grid);
        for (int j = 0; j <= grid; ++j) {
            const double d = d_max * j / grid;
            const auto v = hk_envelope(t, d, triple, constants, vol);
            if (v.lower > v.upper) {
                std::ostringstream msg;
                msg << "lower envelope exceeds upper at t=" << t << ", d=" << d << " ("
                    << v.lower << " > " << v.upper << ")";
                return msg.str();
            }
        }
    }
    return std::nullopt;
}

} // namespace jklab
