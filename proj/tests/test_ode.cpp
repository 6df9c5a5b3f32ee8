#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <etdf/models.hpp>
#include <etdf/ode.hpp>

#include <cmath>

using namespace etdf;
using doctest::Approx;

namespace {
constexpr double kTol = 1e-10;

IntegrateOptions tight() {
    IntegrateOptions o;
    o.rtol = kTol;
    o.atol = 1e-12;
    return o;
}
}  // namespace

TEST_CASE("zero field stays constant") {
    auto rhs = [](double, std::span<const double>, std::span<double> dy) {
        for (auto& v : dy) v = 0.0;
    };
    const Trajectory tr = integrate(rhs, 0.0, 2.5, {1.0, -3.0, 0.25}, tight());
    const Vector mid = tr.eval(1.7);
    CHECK(mid[0] == Approx(1.0).epsilon(1e-14));
    CHECK(mid[1] == Approx(-3.0).epsilon(1e-14));
    CHECK(tr.back()[2] == Approx(0.25).epsilon(1e-14));
}

TEST_CASE("scalar exponential") {
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0]; };
    const Trajectory tr = integrate(rhs, 0.0, 1.0, {1.0}, tight());
    CHECK(tr.back()[0] == Approx(std::exp(1.0)).epsilon(10 * kTol));
    // dense output along the way
    for (double t : {0.11, 0.37, 0.62, 0.93})
        CHECK(tr.eval(t)[0] == Approx(std::exp(t)).epsilon(1e-8));
    // derivative of the interpolant approximates the field
    CHECK(tr.derivative(0.5)[0] == Approx(std::exp(0.5)).epsilon(1e-6));
}

TEST_CASE("uncontrolled Hopf orbit closes after one period") {
    const HopfModel m = hopf_system(-0.25);
    auto rhs = [&m](double, std::span<const double> y, std::span<double> dy) {
        const Vector f = m.system.f(Vector(y.begin(), y.end()), 0.0);
        dy[0] = f[0];
        dy[1] = f[1];
    };
    const Vector x0 = m.orbit.x(0.0);
    const Trajectory tr = integrate(rhs, 0.0, 2 * M_PI, x0, tight());
    CHECK(std::abs(tr.back()[0] - x0[0]) < 10 * kTol);
    CHECK(std::abs(tr.back()[1] - x0[1]) < 10 * kTol);
}

TEST_CASE("fundamental matrix basics") {
    SUBCASE("zero generator gives identity") {
        const Matrix Y = fundamental_matrix([](double) { return Matrix(2, 2); }, 0.0, 3.0, 2,
                                            tight());
        CHECK(Y(0, 0) == Approx(1.0));
        CHECK(Y(1, 1) == Approx(1.0));
        CHECK(std::abs(Y(0, 1)) < 1e-13);
        CHECK(std::abs(Y(1, 0)) < 1e-13);
    }
    SUBCASE("constant diagonal decouples to scalar exponentials") {
        Matrix D(2, 2);
        D(0, 0) = -0.5;
        D(1, 1) = 0.3;
        const double T = 2.0;
        const Matrix Y = fundamental_matrix([&D](double) { return D; }, 0.0, T, 2, tight());
        CHECK(Y(0, 0) == Approx(std::exp(-0.5 * T)).epsilon(1e-9));
        CHECK(Y(1, 1) == Approx(std::exp(0.3 * T)).epsilon(1e-9));
    }
}

TEST_CASE("Hopf linearisation monodromy has multipliers {1, e^pi}") {
    const HopfModel m = hopf_system(-0.25);
    const Matrix P0 = monodromy_uncontrolled(m.lin, kTol, 1e-12);
    CVector ev = eigenvalues(P0);
    sort_complex(ev);
    CHECK(std::abs(ev[0] - 1.0) < 1e-8);
    CHECK(std::abs(ev[1] - std::exp(M_PI)) < 1e-6);
    // e^pi ~ 23.1407, the benchmark unstable multiplier
    CHECK(std::exp(M_PI) == Approx(23.1407).epsilon(1e-4));
    // componentwise closed form diag(1, e^pi)
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(P0(i, j) - m.P0_closed_form(i, j)) < 1e-7);
}

TEST_CASE("monodromy consistency check rejects nonpositive determinants") {
    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(1, 1) = -2.0;
    CHECK_THROWS_WITH_AS(check_monodromy_consistent(bad),
                         doctest::Contains("inconsistent monodromy"), std::runtime_error);
}

TEST_CASE("composition over half intervals") {
    const HopfModel m = hopf_system(-0.1);
    const double T = 2 * M_PI;
    auto gen = [&m](double t) { return m.lin.A(t); };
    const Matrix full = fundamental_matrix(gen, 0.0, T, 2, tight());
    const Matrix first = fundamental_matrix(gen, 0.0, T / 2, 2, tight());
    const Matrix second = fundamental_matrix(gen, T / 2, T, 2, tight());
    const Matrix composed = second * first;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(full(i, j) - composed(i, j)) <
                  10 * kTol * std::max(1.0, frobenius_norm(full)));
}

TEST_CASE("real generator through the complex path stays real") {
    const HopfModel m = hopf_system(-0.25);
    auto genc = [&m](double t) { return to_complex(m.lin.A(t)); };
    const CMatrix Yc = fundamental_matrix_complex(genc, 0.0, 2 * M_PI, 2, tight());
    const Matrix Yr = fundamental_matrix([&m](double t) { return m.lin.A(t); }, 0.0, 2 * M_PI, 2,
                                         tight());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(Yc(i, j).imag()) < 1e-12 * frobenius_norm(Yr));
            CHECK(Yc(i, j).real() == Approx(Yr(i, j)).epsilon(1e-8));
        }
}

TEST_CASE("breakpoints let the integrator cross a piecewise generator cleanly") {
    // dy/dt = s(t) y with s = 0 on [0,1), s = 1 on [1,2]: y(2) = e
    auto rhs = [](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = (t >= 1.0 ? 1.0 : 0.0) * y[0];
    };
    IntegrateOptions o = tight();
    o.breakpoints = {1.0};
    const Trajectory tr = integrate(rhs, 0.0, 2.0, {1.0}, o);
    CHECK(tr.back()[0] == Approx(std::exp(1.0)).epsilon(1e-9));
    // breakpoint is an exact step boundary
    bool found = false;
    for (double t : tr.times())
        if (t == 1.0) found = true;
    CHECK(found);
}

TEST_CASE("step underflow reports the offending time") {
    // finite-time blowup y' = y^2, y(0)=1 blows up at t=1
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[0] * y[0];
    };
    try {
        integrate(rhs, 0.0, 2.0, {1.0}, tight());
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.t == Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("eval outside the stored range throws") {
    auto rhs = [](double, std::span<const double>, std::span<double> dy) { dy[0] = 1.0; };
    const Trajectory tr = integrate(rhs, 0.0, 1.0, {0.0}, tight());
    CHECK_THROWS_AS(tr.eval(1.5), std::out_of_range);
    CHECK_THROWS_AS(tr.eval(-0.5), std::out_of_range);
}
