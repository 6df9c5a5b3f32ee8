#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <etdf/design.hpp>
#include <etdf/gate.hpp>
#include <etdf/models.hpp>

#include <cmath>
#include <random>

using namespace etdf;
using doctest::Approx;

namespace {
Matrix hopf_P0(double p) {
    Matrix P0(2, 2);
    P0(0, 0) = 1.0;
    P0(1, 1) = std::exp(-4 * M_PI * p);
    return P0;
}
}  // namespace

TEST_CASE("controllability on the Hopf closed form") {
    const Matrix P0 = hopf_P0(-0.25);
    const Vector b0{1.0, 1.0};
    const Controllability c = controllability(P0, b0);
    // det [[1,1],[1,e^pi]] = e^pi - 1
    CHECK(c.det == Approx(std::exp(M_PI) - 1.0).epsilon(1e-12));
    CHECK(c.det == Approx(22.1407).epsilon(1e-4));
    CHECK(c.controllable());
    CHECK(c.cond > 1.0);
}

TEST_CASE("repeated Krylov columns are uncontrollable") {
    const Matrix I2 = Matrix::identity(2);
    const Controllability c = controllability(I2, {0.7, -0.3});
    CHECK(c.det == Approx(0.0));
    CHECK_FALSE(c.controllable());
}

TEST_CASE("scalar case") {
    Matrix P0(1, 1);
    P0(0, 0) = 2.0;
    const Controllability c = controllability(P0, {3.0});
    CHECK(c.krylov(0, 0) == Approx(3.0));
    CHECK(c.det == Approx(3.0));
}

TEST_CASE("gain design reproduces the benchmark Hopf gains") {
    const Matrix P0 = hopf_P0(-0.25);
    const Vector b0{1.0, 1.0};
    const CVector targets{Complex(0, 0.5), Complex(0, -0.5)};
    const GainReport rep = design_etdf_gains(P0, b0, targets);
    CHECK(rep.K0[0] == Approx(-0.258).epsilon(0.005));
    CHECK(rep.K0[1] == Approx(4.786).epsilon(0.001));
    // spec(P0 exp(-b K0ᵀ)) hits the targets
    CHECK(rep.max_residual < 1e-9);
    // assign_spectrum_exp itself satisfies its contract: spec(A e^{bKᵀ}) = targets
    const Vector K = assign_spectrum_exp(P0, b0, targets);
    const CVector achieved = eigenvalues(P0 * rank1_exp(b0, K));
    CHECK(greedy_match_distance(achieved, targets) < 1e-9);
    for (std::size_t i = 0; i < 2; ++i) CHECK(K[i] == Approx(-rep.K0[i]).epsilon(1e-12));
}

TEST_CASE("assigning the existing spectrum keeps the matrix") {
    Matrix A(2, 2);
    A(0, 0) = 0.4;
    A(0, 1) = 0.2;
    A(1, 0) = -0.1;
    A(1, 1) = 0.8;
    CVector spec = eigenvalues(A);
    const Vector b{1.0, 0.5};
    const Vector K = assign_spectrum_exp(A, b, spec);
    // K = 0 is the valid output here; accept any K whose closed loop matches spec(A)
    const CVector achieved = eigenvalues(A * rank1_exp(b, K));
    CHECK(greedy_match_distance(achieved, spec) < 1e-9);
    CHECK(norm2(K) < 1e-6);
}

TEST_CASE("random controllable systems, verified by independent eigensolve") {
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int done = 0;
    while (done < 100) {
        Matrix A(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) A(i, j) = unif(rng);
        if (!(determinant(A) > 0.05)) continue;
        const Vector b{unif(rng), unif(rng), unif(rng)};
        if (!controllability(A, b).controllable(1e-6)) continue;
        // conjugate-closed targets with positive product
        const double re = unif(rng), im = 0.1 + std::abs(unif(rng));
        const double real_target = 0.1 + std::abs(unif(rng));
        const CVector targets{Complex(re, im), Complex(re, -im), Complex(real_target, 0)};
        Vector K;
        try {
            K = assign_spectrum_exp(A, b, targets);
        } catch (const AssignmentError&) {
            continue;  // near-uncontrollable draw; verification guard refused
        }
        const CVector achieved = eigenvalues(A * rank1_exp(b, K));
        CHECK(greedy_match_distance(achieved, targets) < 1e-7);
        // determinant identity det(A e^{bKᵀ}) = det A e^{Kᵀb}
        const double lhs = determinant(A * rank1_exp(b, K));
        const double rhs = determinant(A) * std::exp(dot(K, b));
        CHECK(lhs == Approx(rhs).epsilon(1e-9));
        ++done;
    }
    CHECK(done == 100);
}

TEST_CASE("determinant obstruction and uncontrollable pair are rejected") {
    Matrix A = Matrix::identity(2);
    A(0, 0) = 2.0;
    SUBCASE("negative target product") {
        CHECK_THROWS_AS(assign_spectrum_exp(A, {1.0, 1.0}, {Complex(-1, 0), Complex(0.5, 0)}),
                        AssignmentError);
    }
    SUBCASE("uncontrollable") {
        const Matrix I2 = Matrix::identity(2);
        CHECK_THROWS_WITH_AS(assign_spectrum_exp(I2, {1.0, 1.0}, {Complex(0.1, 0), Complex(0.2, 0)}),
                             doctest::Contains("assignment impossible"), AssignmentError);
    }
    SUBCASE("nonpositive det A") {
        Matrix B(2, 2);
        B(0, 0) = 1.0;
        B(1, 1) = -1.0;
        CHECK_THROWS_AS(assign_spectrum_exp(B, {1.0, 0.0}, {Complex(0.1, 0), Complex(0.2, 0)}),
                        std::invalid_argument);
    }
}

TEST_CASE("scaling targets scales the rank-one exponential determinant") {
    // det(A e^{bKᵀ}) = Π targets, so scaling all targets by a>0 scales e^{Kᵀb} by aⁿ
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix A(2, 2);
    A(0, 0) = 1.1;
    A(0, 1) = 0.3;
    A(1, 0) = -0.2;
    A(1, 1) = 0.9;
    const Vector b{1.0, -0.4};
    for (int trial = 0; trial < 10; ++trial) {
        const double re = unif(rng), im = 0.2 + std::abs(unif(rng));
        const CVector t1{Complex(re, im), Complex(re, -im)};
        const double a = 0.5 + std::abs(unif(rng));
        CVector t2 = t1;
        for (auto& z : t2) z *= a;
        const Vector K1 = assign_spectrum_exp(A, b, t1);
        const Vector K2 = assign_spectrum_exp(A, b, t2);
        CHECK(std::exp(dot(K2, b)) / std::exp(dot(K1, b)) == Approx(a * a).epsilon(1e-8));
    }
}

TEST_CASE("conjugate-closed targets give a real gain") {
    // the construction is real arithmetic end to end; verify the polynomial
    // route rejects non-closed target sets instead of silently truncating
    CHECK_THROWS_AS(poly_from_roots({Complex(0.3, 0.2), Complex(0.4, -0.2)}),
                    std::invalid_argument);
}

// ---------------------------------------------------------------------------
// impulse profile
// ---------------------------------------------------------------------------

TEST_CASE("impulse values") {
    const double T = 2 * M_PI, delta = T / 500;
    ImpulseProfile reg{delta, T, true};
    ImpulseProfile raw{delta, T, false};
    reg.validate();
    raw.validate();

    CHECK(impulse_value(delta / 2, raw) == Approx(1.0 / delta));
    CHECK(impulse_value(delta / 2, reg) == Approx(1.0 / delta));
    CHECK(raw.value(T / 2) == Approx(0.0));
    CHECK(reg.value(T / 2) == Approx(0.0));
    // third branch: t = δ + δ²/2 -> (1/δ) m(1/2)
    const double d2 = delta * delta;
    CHECK(reg.value(delta + d2 / 2) == Approx((1.0 / delta) * smoothstep(0.5)));
    CHECK(smoothstep(0.5) == Approx(0.5));
    // periodicity
    CHECK(reg.value(delta / 2 + 3 * T) == Approx(1.0 / delta));
    CHECK(reg.value(delta / 2 - 2 * T) == Approx(1.0 / delta));

    SUBCASE("unregularised integrates to exactly 1, regularised to 1 + O(δ)") {
        auto mass = [&](const ImpulseProfile& p) {
            const int N = 2'000'000;
            double s = 0;
            for (int k = 0; k < N; ++k) s += p.value(T * (k + 0.5) / N);
            return s * T / N;
        };
        CHECK(mass(raw) == Approx(1.0).epsilon(1e-3));
        CHECK(mass(reg) == Approx(1.0 + delta).epsilon(2e-2));
    }

    SUBCASE("regularised and raw agree outside the ramp intervals") {
        for (double t : {0.0, delta / 3, delta, delta + d2, T / 3, T - d2, T - 1e-9}) {
            const double tau = reg.local_time(t);
            const bool in_ramp = (tau > delta && tau < delta + d2) || (tau > T - d2 && tau < T);
            if (!in_ramp) CHECK(reg.value(t) == Approx(raw.value(t)));
        }
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS((ImpulseProfile{0.0, T, false}.validate()), std::invalid_argument);
        CHECK_THROWS_AS((ImpulseProfile{T, T, false}.validate()), std::invalid_argument);
        // 2δ² + δ >= T rejected in the regularised case
        CHECK_THROWS_AS((ImpulseProfile{0.9 * T, T, true}.validate()), std::invalid_argument);
    }
}

// ---------------------------------------------------------------------------
// section time and state gate
// ---------------------------------------------------------------------------

TEST_CASE("section time variants") {
    const HopfModel m = hopf_system(-0.25);
    SUBCASE("anchor maps to zero") {
        CHECK(section_time(m.orbit.anchor(), m.orbit, SectionVariant::linear) == Approx(0.0));
        CHECK(std::abs(section_time(m.orbit.anchor(), m.orbit, SectionVariant::implicit)) < 1e-12);
    }
    SUBCASE("points slightly along the orbit") {
        const Vector x = m.orbit.x(0.01);
        // linear variant: t + O(t^2); here exactly sin(0.01) for this geometry
        CHECK(section_time(x, m.orbit, SectionVariant::linear) == Approx(0.01).epsilon(1e-2));
        CHECK(std::abs(section_time(x, m.orbit, SectionVariant::linear) - 0.01) < 1e-4);
        // implicit variant recovers the exact phase
        CHECK(section_time(x, m.orbit, SectionVariant::implicit) == Approx(0.01).epsilon(1e-10));
    }
    SUBCASE("orthogonal displacements give zero in the linear variant") {
        Vector x = m.orbit.anchor();
        // anchor velocity is (r, 0); displace along e2
        x[1] += 0.05;
        CHECK(section_time(x, m.orbit, SectionVariant::linear) == Approx(0.0));
    }
}

TEST_CASE("state gate") {
    const HopfModel m = hopf_system(-0.25);
    GainDesign d;
    d.K0 = {-0.258, 4.786};
    d.delta = 2 * M_PI / 500;
    d.epsilon = 0.04;
    d.rho = 0.3;
    d.gating = Gating::state_gated;

    SUBCASE("vanishes outside the 2ρ ball") {
        Vector far = m.orbit.anchor();
        far[0] += 2.5 * d.rho;
        CHECK(state_gate(far, m.orbit, d) == Approx(0.0));
        CHECK(state_gate(m.orbit.x(M_PI), m.orbit, d) == Approx(0.0));
    }
    SUBCASE("reproduces the time gate along the orbit") {
        ImpulseProfile prof{d.delta, m.orbit.period(), true};
        const double d2 = d.delta * d.delta;
        // the whole active window sits well inside the ρ ball for these
        // parameters; the ramp midpoint is the case where the linear section
        // variant would be off by O(t²)·(1/δ³)
        for (double t :
             {0.0, d.delta / 2, d.delta, d.delta + d2 / 2, d.delta * 1.4, 0.05, -d2 / 2}) {
            const double expect = prof.value(t);
            CHECK(state_gate(m.orbit.x(t), m.orbit, d) == Approx(expect).epsilon(1e-9));
        }
    }
    SUBCASE("smooth bump between ρ and 2ρ") {
        CHECK(section_bump(0.5 * d.rho, d.rho) == Approx(1.0));
        CHECK(section_bump(2.5 * d.rho, d.rho) == Approx(0.0));
        const double mid = section_bump(1.5 * d.rho, d.rho);
        CHECK(mid > 0.0);
        CHECK(mid < 1.0);
    }
}

TEST_CASE("gains across the orbit family stay sign-definite and blow up toward the Hopf point") {
    // K1 < 0 on the whole family; ||K|| grows monotonically as p -> 0-
    double prev_norm = 0;
    for (double p : {-0.5, -0.4, -0.3, -0.2, -0.1, -0.05, -0.02, -0.01, -0.005}) {
        const GainReport rep =
            design_etdf_gains(hopf_P0(p), {1.0, 1.0}, {Complex(0, 0.5), Complex(0, -0.5)});
        CHECK(rep.K0[0] < 0.0);
        if (p >= -0.05) {
            CHECK(norm2(rep.K0) > prev_norm);
        }
        prev_norm = norm2(rep.K0);
    }
}
