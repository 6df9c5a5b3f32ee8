#pragma once

// Autonomous gating: section time reconstruction near the Poincaré section at
// x_*(0) (linear projection or implicit Newton variant) and the state gate
// Δ_{δ,ρ}(x) = J_ρ(x) Δ_δ(t̃(x)) with a smooth bump J_ρ.

#include <cmath>
#include <stdexcept>

#include "design.hpp"
#include "impulse.hpp"
#include "system.hpp"

namespace etdf {

struct SectionProjectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// t̃(x): linear variant projects onto the orbit velocity at the anchor,
// implicit variant solves ẋ_*(0)ᵀ(x - x_*(t)) = 0 for t near 0 by Newton.
inline double section_time(const Vector& x, const PeriodicOrbit& orbit,
                           SectionVariant variant = SectionVariant::linear, int max_iter = 20) {
    const Vector& v0 = orbit.anchor_velocity();
    const Vector& x0 = orbit.anchor();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += v0[i] * (x[i] - x0[i]);
        den += v0[i] * v0[i];
    }
    const double t_lin = num / den;
    if (variant == SectionVariant::linear) return t_lin;

    double t = t_lin;
    const double scale = std::sqrt(den) * std::max(1.0, orbit.diameter());
    for (int it = 0; it < max_iter; ++it) {
        const Vector xs = orbit.x(t), vs = orbit.xdot(t);
        double g = 0, dg = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            g += v0[i] * (x[i] - xs[i]);
            dg -= v0[i] * vs[i];
        }
        if (std::abs(dg) < 1e-14 * scale)
            throw SectionProjectionError("section projection failed: flat phase condition");
        const double step = g / dg;
        t -= step;
        if (std::abs(step) < 1e-14 * std::max(1.0, orbit.period())) return t;
    }
    throw SectionProjectionError("section projection failed: Newton did not converge");
}

// J_ρ: 1 inside radius ρ of x_*(0), 0 outside 2ρ, smoothstep in between.
inline double section_bump(double dist, double rho) {
    return smoothstep((2 * rho - dist) / rho);
}

// Δ_{δ,ρ}(x) with the regularised impulse profile. The implicit section time
// makes the gate reproduce the time gate exactly along the orbit. Off the
// orbit the implicit equation can lose its root (the projection coordinate
// exceeds the orbit's range); the section map is arbitrary-but-smooth there,
// so the linear projection serves as the extension. Those states sit far from
// the active window, so the gate value is unaffected.
inline double state_gate(const Vector& x, const PeriodicOrbit& orbit, const GainDesign& design) {
    const Vector& x0 = orbit.anchor();
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = x[i] - x0[i];
        d2 += e * e;
    }
    const double dist = std::sqrt(d2);
    if (dist >= 2 * design.rho) return 0.0;
    const double j = section_bump(dist, design.rho);
    ImpulseProfile prof{design.delta, orbit.period(), true};
    double ttil;
    if (design.section == SectionVariant::implicit) {
        try {
            ttil = section_time(x, orbit, SectionVariant::implicit);
        } catch (const SectionProjectionError&) {
            ttil = section_time(x, orbit, SectionVariant::linear);
        }
    } else {
        ttil = section_time(x, orbit, SectionVariant::linear);
    }
    return j * prof.value(ttil);
}

}  // namespace etdf
