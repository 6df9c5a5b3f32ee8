#pragma once

// Gain construction: controllability (Krylov) test and rank-one exponential
// spectrum assignment. assign_spectrum_exp finds K with
// spec(A exp(b Kᵀ)) = targets; the closed-loop feedback uses the sign
// convention spec(P0 exp(-b K0ᵀ)) = targets, handled by design_etdf_gains.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "impulse.hpp"
#include "linalg.hpp"

namespace etdf {

enum class Gating { time_gated, state_gated, constant_gain };
enum class SectionVariant { linear, implicit };

struct GainDesign {
    Vector K0;
    double delta = 0;       // impulse width, in (0, T)
    double epsilon = 0;     // memory parameter, in (0, 1)
    double rho = 0;         // state-gate radius
    CVector targets;        // closed under conjugation, positive real product
    Gating gating = Gating::time_gated;
    SectionVariant section = SectionVariant::implicit;
    bool regularised_impulse = true;
    double gate_period_scale = 1.0;  // != 1 detunes the time gate (drift experiments)

    ImpulseProfile profile(double T) const {
        ImpulseProfile p{delta, T * gate_period_scale, regularised_impulse};
        p.validate();
        return p;
    }

    void validate(double T) const {
        if (!(epsilon > 0 && epsilon < 1))
            throw std::invalid_argument("GainDesign: epsilon must lie in (0,1)");
        if (gating != Gating::constant_gain) profile(T);
        if (gating == Gating::state_gated && !(rho > 0))
            throw std::invalid_argument("GainDesign: state gating needs rho > 0");
        if (!targets.empty()) {
            Complex prod = 1.0;
            for (const Complex& t : targets) prod *= t;
            if (!(prod.real() > 0) || std::abs(prod.imag()) > 1e-9 * std::abs(prod))
                throw std::invalid_argument("GainDesign: target product must be real positive");
        }
    }
};

struct Controllability {
    Matrix krylov;
    double det = 0;
    double cond = 0;
    // scale-aware threshold: the exact-arithmetic condition is det != 0
    bool controllable(double rel = 1e-10) const {
        double colprod = 1.0;
        for (std::size_t j = 0; j < krylov.cols(); ++j) {
            double c = 0;
            for (std::size_t i = 0; i < krylov.rows(); ++i) c += krylov(i, j) * krylov(i, j);
            colprod *= std::sqrt(c);
        }
        return std::abs(det) > rel * std::max(colprod, 1e-300);
    }
};

// Krylov matrix [b0, P0 b0, ..., P0^{n-1} b0] and its determinant.
inline Controllability controllability(const Matrix& P0, const Vector& b0) {
    const std::size_t n = P0.rows();
    if (b0.size() != n) throw std::invalid_argument("controllability: dimension mismatch");
    Controllability c;
    c.krylov = Matrix(n, n);
    Vector col = b0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) c.krylov(i, j) = col[i];
        col = P0 * col;
    }
    c.det = determinant(c.krylov);
    c.cond = condition_number(c.krylov);
    return c;
}

struct AssignmentError : std::runtime_error {
    AssignmentError(const std::string& what, CVector achieved_spec = {})
        : std::runtime_error(what), achieved(std::move(achieved_spec)) {}
    CVector achieved;
};

// σ(c) = (e^c - 1)/c with the c→0 limit.
inline double sigma_scalar(double c) { return (std::abs(c) < 1e-12) ? 1.0 : std::expm1(c) / c; }

// exp(b Kᵀ) = I + σ(Kᵀb) b Kᵀ  (rank-one exponential, exact)
inline Matrix rank1_exp(const Vector& b, const Vector& K) {
    const std::size_t n = b.size();
    const double s = sigma_scalar(dot(K, b));
    Matrix E = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) E(i, j) += s * b[i] * K[j];
    return E;
}

// Ackermann's formula for the pair (A, B): L with spec(A + B Lᵀ) = targets.
// Implemented via the controllable-canonical-form identity
// Lᵀ = -e_nᵀ C⁻¹ p(A) with explicit characteristic-polynomial coefficients.
inline Vector ackermann_place(const Matrix& A, const Vector& B, const CVector& targets) {
    const std::size_t n = A.rows();
    const Controllability ctr = controllability(A, B);
    if (!ctr.controllable()) throw AssignmentError("assignment impossible: uncontrollable pair");
    const Vector coeff = poly_from_roots(targets);  // ascending a_0..a_{n-1}, monic
    // p(A) by Horner: P = A + a_{n-1} I, then P = P A + a_k I
    Matrix P = A;
    for (std::size_t i = 0; i < n; ++i) P(i, i) += coeff[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) {
        P = P * A;
        for (std::size_t i = 0; i < n; ++i) P(i, i) += coeff[k];
    }
    Vector en(n, 0.0);
    en[n - 1] = 1.0;
    const Vector q = solve(transpose(ctr.krylov), en);  // q = C⁻ᵀ e_n
    const Vector F = transpose(P) * q;                  // Fᵀ = e_nᵀ C⁻¹ p(A)
    Vector L(n);
    for (std::size_t i = 0; i < n; ++i) L[i] = -F[i];
    return L;
}

// K with spec(A exp(b Kᵀ)) = targets, for controllable (A, b), det A > 0 and
// conjugation-closed targets with positive product. Verified internally by an
// independent eigensolve before returning.
inline Vector assign_spectrum_exp(const Matrix& A, const Vector& b, const CVector& targets,
                                  double verify_rel = 1e-9) {
    const std::size_t n = A.rows();
    if (targets.size() != n)
        throw std::invalid_argument("assign_spectrum_exp: need exactly n targets");
    const double detA = determinant(A);
    if (!(detA > 0)) throw std::invalid_argument("assign_spectrum_exp: det A must be positive");
    Complex prod = 1.0;
    for (const Complex& t : targets) prod *= t;
    if (!(prod.real() > 0) || std::abs(prod.imag()) > 1e-9 * std::abs(prod))
        throw AssignmentError("determinant obstruction: target product must be real positive");

    // A exp(bKᵀ) = A + (A b) Lᵀ with L = σ(Kᵀb) K, so place the pair (A, A b).
    const Vector L = ackermann_place(A, A * b, targets);
    const double beta = dot(L, b);
    // determinant identity: det(A exp(bKᵀ)) = det A e^{Kᵀb} = det A (1 + β)
    if (!(1.0 + beta > 0))
        throw AssignmentError("determinant obstruction: log of nonpositive 1+Lᵀb");
    const double c = std::log1p(beta);
    const double s = sigma_scalar(c);
    Vector K(n);
    for (std::size_t i = 0; i < n; ++i) K[i] = L[i] / s;

    // independent verification through the rank-one exponential + eigensolve
    const CVector achieved = eigenvalues(A * rank1_exp(b, K));
    double scale = 0;
    for (const Complex& t : targets) scale = std::max(scale, std::abs(t));
    const double mismatch = greedy_match_distance(achieved, targets);
    if (mismatch > verify_rel * std::max(scale, 1e-30))
        throw AssignmentError("ill-conditioned assignment: achieved spectrum off target",
                              achieved);
    return K;
}

struct GainReport {
    Vector K0;
    double krylov_det = 0;
    double krylov_cond = 0;
    CVector achieved;       // spec(P0 exp(-b0 K0ᵀ))
    double max_residual = 0;
};

// Feedback-law convention: u = Δ_δ K0ᵀ(x̃ - x) linearises to A - b Δ K0ᵀ, so the
// δ→0 closed-loop matrix is P0 exp(-b(0) K0ᵀ); K0 is the negated assignment gain.
inline GainReport design_etdf_gains(const Matrix& P0, const Vector& b0, const CVector& targets) {
    GainReport rep;
    const Controllability ctr = controllability(P0, b0);
    rep.krylov_det = ctr.det;
    rep.krylov_cond = ctr.cond;
    if (!ctr.controllable()) throw AssignmentError("assignment impossible: uncontrollable pair");
    const Vector K = assign_spectrum_exp(P0, b0, targets);
    rep.K0.resize(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) rep.K0[i] = -K[i];
    Vector negK0 = K;  // -K0
    rep.achieved = eigenvalues(P0 * rank1_exp(b0, negK0));
    rep.max_residual = greedy_match_distance(rep.achieved, targets);
    return rep;
}

}  // namespace etdf
