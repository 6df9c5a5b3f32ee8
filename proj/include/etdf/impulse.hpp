#pragma once

// The T-periodic near-impulse gate: height 1/δ on [0,δ], zero elsewhere, with
// an optional C¹ regularisation that ramps over intervals of width δ² at both
// ends of the active window.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace etdf {

// C¹ smoothstep: 0 for s<=0, 1 for s>=1, 3s²-2s³ in between.
inline double smoothstep(double s) {
    if (s <= 0) return 0;
    if (s >= 1) return 1;
    return s * s * (3 - 2 * s);
}

struct ImpulseProfile {
    double delta = 0;
    double T = 0;
    bool regularised = true;

    void validate() const {
        if (!(T > 0)) throw std::invalid_argument("ImpulseProfile: T must be positive");
        if (!(delta > 0 && delta < T))
            throw std::invalid_argument("ImpulseProfile: delta must lie in (0, T)");
        if (regularised && !(2 * delta * delta + delta < T))
            throw std::invalid_argument("ImpulseProfile: 2*delta^2 + delta < T required");
    }

    double local_time(double t) const {
        double tau = std::fmod(t, T);
        if (tau < 0) tau += T;
        return tau;
    }

    double value(double t) const {
        const double tau = local_time(t);
        const double inv = 1.0 / delta;
        if (!regularised) return (tau <= delta) ? inv : 0.0;
        const double d2 = delta * delta;
        if (tau <= delta) return inv;
        if (tau >= delta + d2 && tau <= T - d2) return 0.0;
        if (tau < delta + d2) return inv * smoothstep((delta + d2 - tau) / d2);
        return inv * smoothstep((tau - T + d2) / d2);  // tau in (T - δ², T)
    }

    // Edges of the active window inside [t0, t1]; mandatory integrator step
    // boundaries so the formal order survives the piecewise definition.
    std::vector<double> breakpoints(double t0, double t1) const {
        std::vector<double> bp;
        const double d2 = delta * delta;
        const double k0 = std::floor(t0 / T) - 1;
        for (double k = k0; k * T < t1 + T; k += 1) {
            const double base = k * T;
            for (double e : {base, base + delta, base + delta + d2, base + T - d2})
                if (e > t0 && e < t1) bp.push_back(e);
        }
        return bp;
    }
};

// Free-function form used by the operation contracts.
inline double impulse_value(double t, const ImpulseProfile& prof) { return prof.value(t); }

}  // namespace etdf
