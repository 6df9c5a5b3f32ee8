#pragma once

// Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) with
// 4th-order dense output, mandatory breakpoints for piecewise-smooth right
// hand sides, fundamental matrices and the uncontrolled monodromy matrix.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"

namespace etdf {

struct IntegrationError : std::runtime_error {
    explicit IntegrationError(const std::string& what, double t_fail)
        : std::runtime_error(what + " at t=" + std::to_string(t_fail)), t(t_fail) {}
    double t;
};

struct IntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    std::vector<double> breakpoints;  // mandatory step boundaries inside (t0, t1)
    double max_step = 0;              // 0: unlimited
    std::size_t max_steps = 20'000'000;
    bool store_dense = true;
};

// Dense trajectory produced by integrate(): states at accepted step points plus
// the standard DOPRI5 continuous extension inside every step.
class Trajectory {
public:
    std::size_t dim() const { return dim_; }
    std::size_t steps() const { return times_.empty() ? 0 : times_.size() - 1; }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    const Vector& state(std::size_t i) const { return states_[i]; }
    const Vector& front() const { return states_.front(); }
    const Vector& back() const { return states_.back(); }
    int interpolation_order() const { return have_dense_ ? 4 : 1; }

    Vector eval(double t) const {
        Vector y(dim_);
        eval_into(t, y.data());
        return y;
    }

    Vector derivative(double t) const {
        Vector y(dim_);
        derivative_into(t, y.data());
        return y;
    }

    void eval_into(double t, double* out) const {
        const auto [k, th] = locate(t);
        if (!have_dense_) {  // endpoints only: linear between nodes
            for (std::size_t i = 0; i < dim_; ++i)
                out[i] = (1 - th) * states_[k][i] + th * states_[k + 1][i];
            return;
        }
        const auto& rc = dense_[k];
        const double th1 = 1 - th;
        for (std::size_t i = 0; i < dim_; ++i)
            out[i] = rc[0][i] +
                     th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
    }

    void derivative_into(double t, double* out) const {
        const auto [k, th] = locate(t);
        const double h = times_[k + 1] - times_[k];
        if (!have_dense_) {
            for (std::size_t i = 0; i < dim_; ++i)
                out[i] = (states_[k + 1][i] - states_[k][i]) / h;
            return;
        }
        const auto& rc = dense_[k];
        for (std::size_t i = 0; i < dim_; ++i) {
            // d/dθ of rc1 + θ rc2 + θ(1-θ) rc3 + θ²(1-θ) rc4 + θ²(1-θ)² rc5
            const double dv = rc[1][i] + (1 - 2 * th) * rc[2][i] +
                              th * (2 - 3 * th) * rc[3][i] +
                              2 * th * (1 - th) * (1 - 2 * th) * rc[4][i];
            out[i] = dv / h;
        }
    }

private:
    template <typename Rhs>
    friend Trajectory integrate(Rhs&& rhs, double t0, double t1, Vector y0,
                                const IntegrateOptions& opt);

    std::pair<std::size_t, double> locate(double t) const {
        const double span = times_.back() - times_.front();
        const double slack = 1e-12 * std::max(1.0, std::abs(span));
        if (t < times_.front() - slack || t > times_.back() + slack)
            throw std::out_of_range("Trajectory::eval: t outside stored range");
        t = std::clamp(t, times_.front(), times_.back());
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t k = static_cast<std::size_t>(it - times_.begin());
        k = (k == 0) ? 0 : k - 1;
        if (k >= steps()) k = steps() - 1;
        return {k, (t - times_[k]) / (times_[k + 1] - times_[k])};
    }

    std::size_t dim_ = 0;
    bool have_dense_ = true;
    std::vector<double> times_;
    std::vector<Vector> states_;
    std::vector<std::array<Vector, 5>> dense_;
};

// rhs(t, y, dy) with y, dy spans of length dim.
template <typename Rhs>
Trajectory integrate(Rhs&& rhs, double t0, double t1, Vector y0, const IntegrateOptions& opt) {
    if (!(t1 > t0)) throw std::invalid_argument("integrate: requires t1 > t0");
    const std::size_t n = y0.size();

    // Dormand-Prince 5(4) tableau
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    Trajectory traj;
    traj.dim_ = n;
    traj.have_dense_ = opt.store_dense;
    traj.times_.push_back(t0);
    traj.states_.push_back(y0);

    // segment boundaries: t0, sorted unique interior breakpoints, t1
    std::vector<double> seg{t0};
    {
        std::vector<double> bp = opt.breakpoints;
        std::sort(bp.begin(), bp.end());
        const double tolb = 1e-12 * std::max(1.0, std::abs(t1 - t0));
        for (double b : bp)
            if (b > t0 + tolb && b < t1 - tolb && b > seg.back() + tolb) seg.push_back(b);
        seg.push_back(t1);
    }

    Vector y = std::move(y0);
    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
    auto call = [&](double t, const Vector& yy, Vector& out) {
        rhs(t, std::span<const double>(yy.data(), n), std::span<double>(out.data(), n));
    };

    std::size_t nsteps = 0;
    double h_keep = 0;  // adapted step size carried across segments

    for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
        double t = seg[s];
        const double tend = seg[s + 1];
        call(t, y, k1);  // fresh derivative; rhs may jump at segment boundaries

        double h;
        {
            // cheap starting-step heuristic; adaptivity corrects within a step or two
            double d0 = 0, dd1 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = opt.atol + opt.rtol * std::abs(y[i]);
                d0 += (y[i] / w) * (y[i] / w);
                dd1 += (k1[i] / w) * (k1[i] / w);
            }
            d0 = std::sqrt(d0 / n);
            dd1 = std::sqrt(dd1 / n);
            h = (dd1 > 1e-10) ? 0.01 * std::max(d0, 1e-3) / dd1 : 1e-3 * (tend - t);
            if (h_keep > 0) h = h_keep;
            h = std::min(h, tend - t);
        }
        if (opt.max_step > 0) h = std::min(h, opt.max_step);

        while (t < tend) {
            if (++nsteps > opt.max_steps)
                throw IntegrationError("integrate: step budget exhausted", t);
            bool last = false;
            if (t + h >= tend - 1e-14 * std::max(1.0, std::abs(tend))) {
                // clamp to the boundary, but never enlarge a step the error
                // control already shrank (that would loop on rejection)
                const double hb = tend - t;
                if (hb <= h * (1 + 1e-9)) {
                    h = hb;
                    last = true;
                }
            }

            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a21 * k1[i]);
            call(t + c2 * h, ytmp, k2);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
            call(t + c3 * h, ytmp, k3);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            call(t + c4 * h, ytmp, k4);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            call(t + c5 * h, ytmp, k5);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                      a65 * k5[i]);
            call(t + h, ytmp, k6);
            for (std::size_t i = 0; i < n; ++i)
                ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                      a76 * k6[i]);
            call(t + h, ynew, k7);

            double err = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                      e6 * k6[i] + e7 * k7[i]);
                const double w = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err += (e / w) * (e / w);
            }
            err = std::sqrt(err / n);

            if (err <= 1.0) {
                if (opt.store_dense) {
                    std::array<Vector, 5> rc;
                    for (auto& v : rc) v.resize(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double dy = ynew[i] - y[i];
                        const double bspl = h * k1[i] - dy;
                        rc[0][i] = y[i];
                        rc[1][i] = dy;
                        rc[2][i] = bspl;
                        rc[3][i] = dy - h * k7[i] - bspl;
                        rc[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                        d6 * k6[i] + d7 * k7[i]);
                    }
                    traj.dense_.push_back(std::move(rc));
                }
                t = last ? tend : t + h;  // land on the boundary exactly
                y = ynew;
                k1 = k7;  // FSAL
                traj.times_.push_back(t);
                traj.states_.push_back(y);
                double fac = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
                h *= std::clamp(fac, 0.2, 5.0);
                if (opt.max_step > 0) h = std::min(h, opt.max_step);
                h_keep = h;
                if (last) break;
            } else {
                h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
                if (h < 4 * std::numeric_limits<double>::epsilon() *
                            std::max(std::abs(t), std::abs(t1 - t0)) ||
                    h < 1e-300)
                    throw IntegrationError("stiffness/discontinuity failure", t);
            }
        }
    }
    return traj;
}

template <typename Rhs>
Trajectory integrate(Rhs&& rhs, double t0, double t1, Vector y0) {
    return integrate(std::forward<Rhs>(rhs), t0, t1, std::move(y0), IntegrateOptions{});
}

// Final state only; skips dense storage.
template <typename Rhs>
Vector integrate_final(Rhs&& rhs, double t0, double t1, Vector y0, IntegrateOptions opt = {}) {
    opt.store_dense = false;
    return integrate(std::forward<Rhs>(rhs), t0, t1, std::move(y0), opt).back();
}

// ============================================================================
// Fundamental matrices
// ============================================================================

// Y(t1) with Ẏ = gen(t) Y, Y(t0) = I, integrated column by column.
template <typename Gen>
Matrix fundamental_matrix(Gen&& gen, double t0, double t1, std::size_t n,
                          const IntegrateOptions& opt = {}) {
    Matrix Y(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector col(n, 0.0);
        col[j] = 1.0;
        auto rhs = [&gen, n](double t, std::span<const double> y, std::span<double> dy) {
            const Matrix G = gen(t);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s += G(i, k) * y[k];
                dy[i] = s;
            }
        };
        const Vector yf = integrate_final(rhs, t0, t1, std::move(col), opt);
        for (std::size_t i = 0; i < n; ++i) Y(i, j) = yf[i];
    }
    return Y;
}

// Complex generator; realified to dimension 2n so the one real integrator
// code path is used throughout.
template <typename CGen>
CMatrix fundamental_matrix_complex(CGen&& gen, double t0, double t1, std::size_t n,
                                   const IntegrateOptions& opt = {}) {
    CMatrix Y(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector col(2 * n, 0.0);
        col[j] = 1.0;  // real part of e_j
        auto rhs = [&gen, n](double t, std::span<const double> y, std::span<double> dy) {
            const CMatrix G = gen(t);
            for (std::size_t i = 0; i < n; ++i) {
                double sre = 0, sim = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double gr = G(i, k).real(), gi = G(i, k).imag();
                    sre += gr * y[k] - gi * y[n + k];
                    sim += gi * y[k] + gr * y[n + k];
                }
                dy[i] = sre;
                dy[n + i] = sim;
            }
        };
        const Vector yf = integrate_final(rhs, t0, t1, std::move(col), opt);
        for (std::size_t i = 0; i < n; ++i) Y(i, j) = Complex(yf[i], yf[n + i]);
    }
    return Y;
}

// ============================================================================
// Linearization along a periodic orbit and its monodromy matrix
// ============================================================================

// T-periodic A(t) = ∂ₓf(x_*(t),0) and b(t) = ∂ᵤf(x_*(t),0).
struct Linearization {
    double T = 0;
    std::size_t n = 0;
    std::function<Matrix(double)> A;
    std::function<Vector(double)> b;
};

inline void check_monodromy_consistent(const Matrix& P0) {
    if (!(determinant(P0) > 0))
        throw std::runtime_error("inconsistent monodromy: det P0 <= 0 signals integration failure");
}

inline Matrix monodromy_uncontrolled(const Linearization& lin, double rtol = 1e-10,
                                     double atol = 1e-12) {
    IntegrateOptions opt;
    opt.rtol = rtol;
    opt.atol = atol;
    Matrix P0 = fundamental_matrix([&lin](double t) { return lin.A(t); }, 0.0, lin.T, lin.n, opt);
    check_monodromy_consistent(P0);
    return P0;
}

}  // namespace etdf
