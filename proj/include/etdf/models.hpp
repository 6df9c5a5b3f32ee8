#pragma once

// Benchmark systems: the subcritical Hopf normal form with constant rotation
// (closed-form orbit and linearisation) and a parametrically excited pendulum
// in autonomous-extended form.

#include <cmath>
#include <stdexcept>

#include "linalg.hpp"
#include "system.hpp"

namespace etdf {

struct HopfModel {
    ControlledSystem system;
    PeriodicOrbit orbit;
    Linearization lin;
    Matrix P0_closed_form;  // diag(1, e^{-4πp}); test oracle
    double p = 0;
    double r = 0;  // orbit radius sqrt(-p)
};

// ẋ1 = p x1 - x2 + x1 (x1²+x2²) + u
// ẋ2 = x1 + p x2 + x2 (x1²+x2²) + u
// Unstable periodic orbit x_*(t) = [r sin t, -r cos t], r = sqrt(-p), T = 2π.
inline HopfModel hopf_system(double p) {
    if (!(p < 0)) throw std::invalid_argument("hopf_system: no periodic orbit for p >= 0");
    const double r = std::sqrt(-p);
    const double T = 2 * M_PI;

    ControlledSystem sys;
    sys.n = 2;
    sys.analytic_jacobians = true;
    sys.f = [p](const Vector& x, double u) {
        const double rr = x[0] * x[0] + x[1] * x[1];
        return Vector{p * x[0] - x[1] + x[0] * rr + u, x[0] + p * x[1] + x[1] * rr + u};
    };
    sys.df_dx = [p](const Vector& x, double) {
        Matrix J(2, 2);
        J(0, 0) = p + 3 * x[0] * x[0] + x[1] * x[1];
        J(0, 1) = -1 + 2 * x[0] * x[1];
        J(1, 0) = 1 + 2 * x[0] * x[1];
        J(1, 1) = p + x[0] * x[0] + 3 * x[1] * x[1];
        return J;
    };
    sys.df_du = [](const Vector&, double) { return Vector{1.0, 1.0}; };

    auto xs = [r](double t) { return Vector{r * std::sin(t), -r * std::cos(t)}; };
    auto xdot = [r](double t) { return Vector{r * std::cos(t), r * std::sin(t)}; };
    PeriodicOrbit orbit(T, xs, xdot, OrbitSource::analytic);

    Linearization lin = linearize_along_orbit(sys, orbit);

    Matrix P0(2, 2);
    P0(0, 0) = 1.0;
    P0(1, 1) = std::exp(-4 * M_PI * p);
    return HopfModel{std::move(sys), std::move(orbit), std::move(lin), std::move(P0), p, r};
}

struct PendulumParams {
    double omega0 = 1.0;      // natural frequency of the hanging position
    double gamma = 0.05;      // velocity damping
    double amplitude = 0.35;  // parametric forcing amplitude
    // just below the principal-resonance tongue: the period-two pair exists
    // and the small-amplitude member is the unstable saddle we stabilise
    double Omega = 1.78;
};

// θ'' + γ θ' + (ω0² + a c(t)) sin θ = u with c(t) = cos(Ω t) carried as the
// oscillator pair (x3, x4) so the system is autonomous; state [θ, θ', c, s].
// The period-two orbit (period 4π/Ω) is located by shooting; parameters here
// are repo-defined defaults, see configs/pendulum.cfg.
inline ControlledSystem pendulum_system(const PendulumParams& prm = {}) {
    ControlledSystem sys;
    sys.n = 4;
    sys.analytic_jacobians = true;
    const double w2 = prm.omega0 * prm.omega0;
    sys.f = [prm, w2](const Vector& x, double u) {
        return Vector{x[1], -prm.gamma * x[1] - (w2 + prm.amplitude * x[2]) * std::sin(x[0]) + u,
                      -prm.Omega * x[3], prm.Omega * x[2]};
    };
    sys.df_dx = [prm, w2](const Vector& x, double) {
        Matrix J(4, 4);
        J(0, 1) = 1.0;
        J(1, 0) = -(w2 + prm.amplitude * x[2]) * std::cos(x[0]);
        J(1, 1) = -prm.gamma;
        J(1, 2) = -prm.amplitude * std::sin(x[0]);
        J(2, 3) = -prm.Omega;
        J(3, 2) = prm.Omega;
        return J;
    };
    sys.df_du = [](const Vector&, double) { return Vector{0.0, 1.0, 0.0, 0.0}; };
    return sys;
}

}  // namespace etdf
