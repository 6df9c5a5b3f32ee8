#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <etdf/linalg.hpp>

#include <random>

using namespace etdf;
using doctest::Approx;

TEST_CASE("LU determinant and solve") {
    Matrix a(3, 3);
    a(0, 0) = 2;
    a(0, 1) = 1;
    a(0, 2) = 0;
    a(1, 0) = 1;
    a(1, 1) = 3;
    a(1, 2) = 1;
    a(2, 0) = 0;
    a(2, 1) = 1;
    a(2, 2) = 4;
    // det = 2*(12-1) - 1*(4-0) = 18
    CHECK(determinant(a) == Approx(18.0));

    Vector x{1.0, -2.0, 0.5};
    const Vector b = a * x;
    const Vector xs = solve(a, b);
    for (int i = 0; i < 3; ++i) CHECK(xs[i] == Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("complex LU determinant") {
    CMatrix a(2, 2);
    a(0, 0) = Complex(1, 1);
    a(0, 1) = Complex(0, 2);
    a(1, 0) = Complex(3, 0);
    a(1, 1) = Complex(1, -1);
    // det = (1+i)(1-i) - 3*2i = 2 - 6i
    const Complex d = determinant(a);
    CHECK(d.real() == Approx(2.0));
    CHECK(d.imag() == Approx(-6.0));
}

TEST_CASE("eigenvalues of known small matrices") {
    SUBCASE("diagonal") {
        Matrix a(3, 3);
        a(0, 0) = -1;
        a(1, 1) = 2;
        a(2, 2) = 5;
        CVector ev = eigenvalues(a);
        sort_complex(ev);
        CHECK(ev[0].real() == Approx(-1.0));
        CHECK(ev[1].real() == Approx(2.0));
        CHECK(ev[2].real() == Approx(5.0));
        for (auto z : ev) CHECK(std::abs(z.imag()) < 1e-12);
    }
    SUBCASE("rotation has unit-modulus pair") {
        Matrix r(2, 2);
        const double th = 0.7;
        r(0, 0) = std::cos(th);
        r(0, 1) = -std::sin(th);
        r(1, 0) = std::sin(th);
        r(1, 1) = std::cos(th);
        const CVector ev = eigenvalues(r);
        for (auto z : ev) {
            CHECK(std::abs(z) == Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(z.real() - std::cos(th)) < 1e-12);
        }
    }
}

TEST_CASE("eigenvalues via random similarity transforms") {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng() % 7);
        // known spectrum: a few real values and conjugate pairs
        CVector spec;
        Matrix d(n, n);
        std::size_t i = 0;
        while (i < n) {
            if (i + 1 < n && unif(rng) > 0) {
                const double re = unif(rng), im = std::abs(unif(rng)) + 0.1;
                d(i, i) = re;
                d(i, i + 1) = im;
                d(i + 1, i) = -im;
                d(i + 1, i + 1) = re;
                spec.push_back(Complex(re, im));
                spec.push_back(Complex(re, -im));
                i += 2;
            } else {
                const double re = 2 * unif(rng);
                d(i, i) = re;
                spec.push_back(re);
                ++i;
            }
        }
        // well-conditioned similarity: identity + small random
        Matrix s = Matrix::identity(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) s(r, c) += 0.2 * unif(rng);
        Matrix sinv(n, n);
        {
            auto f = lu_factor(s);
            for (std::size_t c = 0; c < n; ++c) {
                Vector e(n, 0.0);
                e[c] = 1.0;
                const Vector col = f.solve(e);
                for (std::size_t r = 0; r < n; ++r) sinv(r, c) = col[r];
            }
        }
        const Matrix a = s * d * sinv;
        const CVector ev = eigenvalues(a);
        CHECK(greedy_match_distance(ev, spec) < 1e-8);
    }
}

TEST_CASE("eigenvalues of a moderately large matrix") {
    // block-diagonal with known blocks, conjugated by a random orthogonal-ish map
    const std::size_t n = 160;
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix d(n, n);
    CVector spec;
    for (std::size_t i = 0; i < n; i += 2) {
        const double re = unif(rng), im = std::abs(unif(rng));
        d(i, i) = re;
        d(i, i + 1) = im;
        d(i + 1, i) = -im;
        d(i + 1, i + 1) = re;
        spec.push_back(Complex(re, im));
        spec.push_back(Complex(re, -im));
    }
    Matrix s = Matrix::identity(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) s(r, c) += 0.05 * unif(rng);
    Matrix sinv(n, n);
    auto f = lu_factor(s);
    for (std::size_t c = 0; c < n; ++c) {
        Vector e(n, 0.0);
        e[c] = 1.0;
        const Vector col = f.solve(e);
        for (std::size_t r = 0; r < n; ++r) sinv(r, c) = col[r];
    }
    const CVector ev = eigenvalues(s * d * sinv);
    CHECK(greedy_match_distance(ev, spec) < 1e-6);
}

TEST_CASE("left eigenvector") {
    Matrix a(2, 2);
    a(0, 0) = 1.0;
    a(0, 1) = 0.0;
    a(1, 0) = 2.0;
    a(1, 1) = 3.0;
    // left eigenvector for eigenvalue 1: w A = w -> w = (1, 0) ... check:
    // [w1 w2] A = [w1 + 2 w2, 3 w2] = [w1, w2] requires w2 = 0.
    const Vector w = left_eigenvector(a, 1.0);
    CHECK(std::abs(w[1]) < 1e-12);
    CHECK(std::abs(w[0]) == Approx(1.0));
}

TEST_CASE("singular values and condition number") {
    Matrix a(2, 2);
    a(0, 0) = 3;
    a(1, 1) = 0.5;  // diagonal: singular values 3, 0.5
    const Vector sv = singular_values(a);
    CHECK(sv[0] == Approx(3.0));
    CHECK(sv[1] == Approx(0.5));
    CHECK(condition_number(a) == Approx(6.0));
}

TEST_CASE("poly_from_roots") {
    SUBCASE("conjugate pair") {
        const Vector c = poly_from_roots({Complex(0, 0.5), Complex(0, -0.5)});
        // λ² + 0 λ + 1/4
        CHECK(c[0] == Approx(0.25));
        CHECK(c[1] == Approx(0.0));
    }
    SUBCASE("real roots") {
        const Vector c = poly_from_roots({Complex(1, 0), Complex(2, 0), Complex(3, 0)});
        // (λ-1)(λ-2)(λ-3) = λ³ - 6λ² + 11λ - 6
        CHECK(c[0] == Approx(-6.0));
        CHECK(c[1] == Approx(11.0));
        CHECK(c[2] == Approx(-6.0));
    }
    SUBCASE("non conjugate-closed throws") {
        CHECK_THROWS_AS(poly_from_roots({Complex(0, 1), Complex(1, 0)}), std::invalid_argument);
    }
}

TEST_CASE("greedy matching") {
    CVector a{Complex(1, 0), Complex(0, 1)};
    CVector b{Complex(0, 1.001), Complex(1.002, 0)};
    CHECK(greedy_match_distance(a, b) == Approx(0.002).epsilon(0.01));
    CHECK(std::isinf(greedy_match_distance({Complex(1, 0)}, b)));
}
