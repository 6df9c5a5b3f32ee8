#pragma once

// Plant description (dimension, right-hand side, input coupling) and periodic
// orbits, either closed form or backed by a dense trajectory.

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "ode.hpp"

namespace etdf {

// ẋ = f(x, u) with scalar input u; Jacobians analytic or finite-difference.
struct ControlledSystem {
    std::size_t n = 0;
    std::function<Vector(const Vector&, double)> f;
    std::function<Matrix(const Vector&, double)> df_dx;
    std::function<Vector(const Vector&, double)> df_du;
    bool analytic_jacobians = false;
};

namespace detail {

inline double fd_step(double scale) { return 1e-6 * std::max(1.0, std::abs(scale)); }

}  // namespace detail

// Central finite-difference Jacobians for systems that only supply f.
inline void attach_fd_jacobians(ControlledSystem& sys) {
    auto f = sys.f;
    const std::size_t n = sys.n;
    sys.df_dx = [f, n](const Vector& x, double u) {
        Matrix J(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = detail::fd_step(x[j]);
            Vector xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const Vector fp = f(xp, u), fm = f(xm, u);
            for (std::size_t i = 0; i < n; ++i) J(i, j) = (fp[i] - fm[i]) / (2 * h);
        }
        return J;
    };
    sys.df_du = [f, n](const Vector& x, double u) {
        const double h = detail::fd_step(u);
        const Vector fp = f(x, u + h), fm = f(x, u - h);
        Vector b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = (fp[i] - fm[i]) / (2 * h);
        return b;
    };
}

// Largest disagreement between analytic and finite-difference Jacobians at x.
inline double jacobian_consistency(const ControlledSystem& sys, const Vector& x, double u) {
    ControlledSystem fd{sys.n, sys.f, nullptr, nullptr, false};
    attach_fd_jacobians(fd);
    const Matrix Ja = sys.df_dx(x, u), Jf = fd.df_dx(x, u);
    const Vector ba = sys.df_du(x, u), bf = fd.df_du(x, u);
    double worst = 0;
    for (std::size_t i = 0; i < sys.n; ++i) {
        worst = std::max(worst, std::abs(ba[i] - bf[i]));
        for (std::size_t j = 0; j < sys.n; ++j)
            worst = std::max(worst, std::abs(Ja(i, j) - Jf(i, j)));
    }
    return worst;
}

enum class OrbitSource { analytic, shooting };

// Periodic orbit x_*(t): period, dense representation, anchor data. Evaluation
// wraps t into [0, T).
class PeriodicOrbit {
public:
    PeriodicOrbit() = default;
    PeriodicOrbit(double T, std::function<Vector(double)> x, std::function<Vector(double)> xdot,
                  OrbitSource source)
        : T_(T), x_(std::move(x)), xdot_(std::move(xdot)), source_(source) {
        if (!(T_ > 0)) throw std::invalid_argument("PeriodicOrbit: period must be positive");
        x0_ = x_(0.0);
        xdot0_ = xdot_(0.0);
        if (norm2(xdot0_) == 0.0)
            throw std::invalid_argument("PeriodicOrbit: xdot(0) must be nonzero");
    }

    double period() const { return T_; }
    std::size_t dim() const { return x0_.size(); }
    OrbitSource source() const { return source_; }
    const Vector& anchor() const { return x0_; }
    const Vector& anchor_velocity() const { return xdot0_; }

    Vector x(double t) const { return x_(wrap(t)); }
    Vector xdot(double t) const { return xdot_(wrap(t)); }

    double closure_defect() const {
        const Vector a = x_(0.0), b = x_(T_);
        Vector d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        return norm2(d);
    }

    // max pairwise distance over a coarse sample; cached
    double diameter() const {
        if (diam_ < 0) {
            constexpr int m = 128;
            std::vector<Vector> pts;
            pts.reserve(m);
            for (int i = 0; i < m; ++i) pts.push_back(x(T_ * i / m));
            double d = 0;
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j) {
                    double s = 0;
                    for (std::size_t k = 0; k < pts[i].size(); ++k) {
                        const double e = pts[i][k] - pts[j][k];
                        s += e * e;
                    }
                    d = std::max(d, s);
                }
            diam_ = std::sqrt(d);
        }
        return diam_;
    }

    Vector centroid() const {
        constexpr int m = 256;
        Vector c(dim(), 0.0);
        for (int i = 0; i < m; ++i) {
            const Vector p = x(T_ * i / m);
            for (std::size_t k = 0; k < c.size(); ++k) c[k] += p[k] / m;
        }
        return c;
    }

    // same orbit with the phase origin shifted by s: new anchor x(s)
    PeriodicOrbit rebased(double s) const {
        auto xf = x_;
        auto df = xdot_;
        const double T = T_;
        return PeriodicOrbit(
            T, [xf, s, T](double t) { return xf(std::fmod(std::fmod(t + s, T) + T, T)); },
            [df, s, T](double t) { return df(std::fmod(std::fmod(t + s, T) + T, T)); }, source_);
    }

    // phase at which the orbit passes closest to the point q (grid scan plus
    // local golden-section refinement)
    double closest_phase(const Vector& q) const {
        auto dist2 = [&](double t) {
            const Vector p = x(t);
            double s = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double e = p[i] - q[i];
                s += e * e;
            }
            return s;
        };
        constexpr int m = 512;
        int best = 0;
        double bestv = dist2(0.0);
        for (int k = 1; k < m; ++k) {
            const double v = dist2(T_ * k / m);
            if (v < bestv) {
                bestv = v;
                best = k;
            }
        }
        double a = T_ * (best - 1) / m, b = T_ * (best + 1) / m;
        const double gr = (std::sqrt(5.0) - 1) / 2;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = dist2(c), fd = dist2(d);
        while (b - a > 1e-12 * T_) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = dist2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = dist2(d);
            }
        }
        return 0.5 * (a + b);
    }

private:
    double wrap(double t) const {
        double tau = std::fmod(t, T_);
        if (tau < 0) tau += T_;
        return tau;
    }

    double T_ = 0;
    std::function<Vector(double)> x_, xdot_;
    OrbitSource source_ = OrbitSource::analytic;
    Vector x0_, xdot0_;
    mutable double diam_ = -1;
};

// A(t), b(t) from the system Jacobians evaluated on the orbit.
inline Linearization linearize_along_orbit(const ControlledSystem& sys,
                                           const PeriodicOrbit& orbit) {
    Linearization lin;
    lin.T = orbit.period();
    lin.n = sys.n;
    lin.A = [dfx = sys.df_dx, orbit](double t) { return dfx(orbit.x(t), 0.0); };
    lin.b = [dfu = sys.df_du, orbit](double t) { return dfu(orbit.x(t), 0.0); };
    return lin;
}

// Orbit backed by a dense trajectory over one period (shooting output).
inline PeriodicOrbit orbit_from_trajectory(Trajectory traj, const ControlledSystem& sys) {
    const double T = traj.t_end() - traj.t_begin();
    auto shared = std::make_shared<Trajectory>(std::move(traj));
    const double tb = shared->t_begin();
    auto x = [shared, tb](double t) { return shared->eval(tb + t); };
    auto xdot = [shared, tb, f = sys.f](double t) { return f(shared->eval(tb + t), 0.0); };
    return PeriodicOrbit(T, x, xdot, OrbitSource::shooting);
}

}  // namespace etdf
