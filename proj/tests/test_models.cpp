#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <etdf/design.hpp>
#include <etdf/models.hpp>
#include <etdf/shooting.hpp>

#include <cmath>

using namespace etdf;
using doctest::Approx;

TEST_CASE("hopf model basics") {
    const HopfModel m = hopf_system(-0.25);
    CHECK(m.r == Approx(0.5));
    CHECK(m.orbit.period() == Approx(2 * M_PI));
    CHECK(m.orbit.closure_defect() < 1e-12);
    // b(t) = [1,1]ᵀ constant
    for (double t : {0.0, 1.0, 4.0}) {
        const Vector b = m.lin.b(t);
        CHECK(b[0] == Approx(1.0));
        CHECK(b[1] == Approx(1.0));
    }
    // unstable Floquet exponent -2p = 0.5: multiplier e^{-4πp} = e^{2π·0.5}
    CHECK(m.P0_closed_form(1, 1) == Approx(std::exp(2 * M_PI * 0.5)));
    CHECK_THROWS_WITH_AS(hopf_system(0.0), doctest::Contains("no periodic orbit"),
                         std::invalid_argument);
}

TEST_CASE("hopf analytic Jacobian matches the hand-derived linearisation") {
    const HopfModel m = hopf_system(-0.25);
    const double r2 = m.r * m.r;
    for (double t : {0.0, 0.7, 2.1, 5.0}) {
        const Matrix A = m.lin.A(t);
        const double s = std::sin(t), c = std::cos(t);
        // along x_* = (r sin t, -r cos t): A11 = 2r² sin², A12 = -1 - 2r² sin cos,
        // A21 = 1 - 2r² sin cos, A22 = 2r² cos²
        CHECK(A(0, 0) == Approx(2 * r2 * s * s).epsilon(1e-8));
        CHECK(A(0, 1) == Approx(-1 - 2 * r2 * s * c).epsilon(1e-8));
        CHECK(A(1, 0) == Approx(1 - 2 * r2 * s * c).epsilon(1e-8));
        CHECK(A(1, 1) == Approx(2 * r2 * c * c).epsilon(1e-8));
    }
    // finite differences agree with the analytic Jacobians
    CHECK(jacobian_consistency(m.system, m.orbit.x(1.3), 0.02) < 1e-5);
}

TEST_CASE("linearisation is T-periodic") {
    const HopfModel m = hopf_system(-0.1);
    const Matrix d = m.lin.A(0.0) - m.lin.A(2 * M_PI);
    CHECK(frobenius_norm(d) < 1e-10);
}

TEST_CASE("closed form vs computed monodromy across the family") {
    for (double p : {-0.05, -0.1, -0.25, -0.5}) {
        const HopfModel m = hopf_system(p);
        const Matrix P0 = monodromy_uncontrolled(m.lin, 1e-10, 1e-12);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(std::abs(P0(i, j) - m.P0_closed_form(i, j)) <
                      1e-7 * std::max(1.0, m.P0_closed_form(1, 1)));
    }
}

TEST_CASE("hopf orbit by shooting") {
    const HopfModel m = hopf_system(-0.25);
    SUBCASE("converges from a nearby seed to the closed form") {
        const ShootingResult res = find_orbit_shooting(m.system, 6.0, {0.0, -0.45});
        CHECK(res.orbit.period() == Approx(2 * M_PI).epsilon(1e-8));
        CHECK(res.residual < 1e-8);
        const Vector x0 = res.orbit.x(0.0);
        CHECK(std::sqrt(x0[0] * x0[0] + x0[1] * x0[1]) == Approx(0.5).epsilon(1e-8));
        // monodromy from the converged Jacobian has multipliers {1, e^pi}
        CVector ev = eigenvalues(res.monodromy);
        sort_complex(ev);
        CHECK(std::abs(ev[0] - 1.0) < 1e-6);
        CHECK(std::abs(ev[1] - std::exp(M_PI)) < 1e-4);
    }
    SUBCASE("seed exactly on the orbit converges immediately") {
        const ShootingResult res =
            find_orbit_shooting(m.system, 2 * M_PI, m.orbit.x(0.0));
        CHECK(res.iterations <= 2);
        CHECK(res.residual < 1e-10);
    }
    SUBCASE("equilibrium seed is rejected") {
        CHECK_THROWS_WITH_AS(find_orbit_shooting(m.system, 6.0, {0.0, 0.0}),
                             doctest::Contains("orbit not found"), OrbitNotFound);
    }
}

TEST_CASE("shooting orbit feeds the design pipeline like the analytic one") {
    const HopfModel m = hopf_system(-0.25);
    const ShootingResult res = find_orbit_shooting(m.system, 6.1, {0.005, -0.46});
    // rebase the shooting orbit so both parametrisations share the anchor
    const PeriodicOrbit orbit = res.orbit.rebased(res.orbit.closest_phase(m.orbit.anchor()));
    const Linearization lin_shoot = linearize_along_orbit(m.system, orbit);
    const Matrix P0a = monodromy_uncontrolled(m.lin, 1e-11, 1e-13);
    const Matrix P0s = monodromy_uncontrolled(lin_shoot, 1e-11, 1e-13);
    const CVector targets{Complex(0, 0.5), Complex(0, -0.5)};
    CHECK(greedy_match_distance(eigenvalues(P0a), eigenvalues(P0s)) < 1e-6);
    const GainReport ga = design_etdf_gains(P0a, m.lin.b(0.0), targets);
    const GainReport gs = design_etdf_gains(P0s, lin_shoot.b(0.0), targets);
    CHECK(std::abs(ga.K0[0] - gs.K0[0]) < 1e-6);
    CHECK(std::abs(ga.K0[1] - gs.K0[1]) < 1e-6);
}

TEST_CASE("pendulum model") {
    const PendulumParams prm{};
    const ControlledSystem sys = pendulum_system(prm);
    SUBCASE("hanging position with zero forcing phase is a fixed point of the pendulum part") {
        const Vector f = sys.f({0.0, 0.0, 0.0, 0.0}, 0.0);
        CHECK(f[0] == Approx(0.0));
        CHECK(f[1] == Approx(0.0));
    }
    SUBCASE("analytic and finite-difference Jacobians agree") {
        CHECK(jacobian_consistency(sys, {0.4, -0.2, 0.7, 0.3}, 0.1) < 1e-5);
    }
    SUBCASE("shooting finds the period-two orbit") {
        const double Tforce = 2 * M_PI / prm.Omega;
        ShootingOptions opt;
        opt.free_period = false;   // period locked to twice the forcing period
        opt.frozen = {2, 3};       // forcing oscillator pinned to (1, 0)
        opt.tol = 1e-10;
        const ShootingResult res =
            find_orbit_shooting(sys, 2 * Tforce, {0.7, 0.0, 1.0, 0.0}, opt);
        CHECK(res.residual < 1e-8);
        CHECK(res.orbit.period() == Approx(2 * Tforce));
        // nontrivial oscillation, not the hanging state
        double amp = 0, halfshift = 0;
        for (int k = 0; k < 64; ++k) {
            const double t = res.orbit.period() * k / 64;
            amp = std::max(amp, std::abs(res.orbit.x(t)[0]));
            halfshift = std::max(halfshift, std::abs(res.orbit.x(t + Tforce)[0] -
                                                     res.orbit.x(t)[0]));
        }
        CHECK(amp > 0.3);
        // period-two relative to forcing: x(t + T_force) != x(t)
        CHECK(halfshift > 0.3);
        // the located orbit is unstable (that is what the feedback is for)
        const Linearization lin = linearize_along_orbit(sys, res.orbit);
        const Matrix P0 = monodromy_uncontrolled(lin, 1e-10, 1e-12);
        double maxmod = 0;
        for (const Complex& z : eigenvalues(P0)) maxmod = std::max(maxmod, std::abs(z));
        CHECK(maxmod > 1.0);
    }
}

TEST_CASE("fd fallback jacobians") {
    ControlledSystem sys;
    sys.n = 2;
    sys.f = [](const Vector& x, double u) {
        return Vector{x[1] + u, -std::sin(x[0]) + u * x[0]};
    };
    attach_fd_jacobians(sys);
    const Matrix J = sys.df_dx({0.3, -0.1}, 0.2);
    CHECK(J(0, 1) == Approx(1.0).epsilon(1e-7));
    CHECK(J(1, 0) == Approx(-std::cos(0.3) + 0.2).epsilon(1e-6));
    const Vector b = sys.df_du({0.3, -0.1}, 0.2);
    CHECK(b[0] == Approx(1.0).epsilon(1e-7));
    CHECK(b[1] == Approx(0.3).epsilon(1e-6));
}
