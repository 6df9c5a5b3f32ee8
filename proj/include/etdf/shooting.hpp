#pragma once

// Periodic-orbit location by single shooting: Newton on the period-map
// residual x(T) - x(0), with the period free for autonomous systems (an
// ẋ-orthogonality phase condition is appended) or pinned together with a set
// of frozen state components for systems carrying a forcing oscillator.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "linalg.hpp"
#include "ode.hpp"
#include "system.hpp"

namespace etdf {

struct OrbitNotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShootingOptions {
    double tol = 1e-10;
    int max_iter = 50;
    bool free_period = true;
    std::vector<std::size_t> frozen;  // state indices pinned to the seed value
    double rtol = 1e-12;
    double atol = 1e-13;
};

struct ShootingResult {
    PeriodicOrbit orbit;
    Matrix monodromy;
    int iterations = 0;
    double residual = 0;
};

inline ShootingResult find_orbit_shooting(const ControlledSystem& sys, double T_guess,
                                          const Vector& x_guess, const ShootingOptions& opt = {}) {
    const std::size_t n = sys.n;
    const Vector f_seed = sys.f(x_guess, 0.0);
    const double scale = std::max(1.0, norm_inf(x_guess));
    if (norm2(f_seed) < 1e-8 * scale)
        throw OrbitNotFound("orbit not found: singular phase condition (seed at equilibrium)");

    std::vector<bool> frozen(n, false);
    for (std::size_t i : opt.frozen) frozen.at(i) = true;
    std::vector<std::size_t> freeidx;
    for (std::size_t i = 0; i < n; ++i)
        if (!frozen[i]) freeidx.push_back(i);
    const std::size_t nf = freeidx.size();
    const std::size_t m = nf + (opt.free_period ? 1 : 0);

    IntegrateOptions iopt;
    iopt.rtol = opt.rtol;
    iopt.atol = opt.atol;

    auto rhs = [&sys](double, std::span<const double> y, std::span<double> dy) {
        const Vector fx = sys.f(Vector(y.begin(), y.end()), 0.0);
        for (std::size_t i = 0; i < fx.size(); ++i) dy[i] = fx[i];
    };
    auto shoot = [&](const Vector& xa, double Ta, Trajectory& out, Vector& res) -> bool {
        if (!(Ta > 0)) return false;
        try {
            out = integrate(rhs, 0.0, Ta, xa, iopt);
        } catch (const IntegrationError&) {
            return false;  // trial escaped (finite-time blowup etc.)
        }
        res.assign(m, 0.0);
        for (std::size_t i = 0; i < nf; ++i) res[i] = out.back()[freeidx[i]] - xa[freeidx[i]];
        if (opt.free_period) {
            double ph = 0;
            for (std::size_t i = 0; i < n; ++i) ph += f_seed[i] * (xa[i] - x_guess[i]);
            res[nf] = ph;
        }
        return true;
    };

    Vector x0 = x_guess;
    double T = T_guess;
    Trajectory traj;
    Matrix mono;
    Vector res;
    if (!shoot(x0, T, traj, res))
        throw OrbitNotFound("orbit not found: seed trajectory escapes");
    double resnorm = norm_inf(res);
    int it = 0;

    for (;; ++it) {
        // variational equation along the current trajectory gives the monodromy
        mono = fundamental_matrix(
            [&sys, &traj](double t) { return sys.df_dx(traj.eval(t), 0.0); }, 0.0, T, n, iopt);
        if (resnorm <= opt.tol * scale) break;
        if (it >= opt.max_iter) throw OrbitNotFound("orbit not found: Newton did not converge");

        Matrix J(m, m);
        for (std::size_t i = 0; i < nf; ++i)
            for (std::size_t j = 0; j < nf; ++j)
                J(i, j) = mono(freeidx[i], freeidx[j]) - (i == j ? 1.0 : 0.0);
        if (opt.free_period) {
            const Vector fT = sys.f(traj.back(), 0.0);
            for (std::size_t i = 0; i < nf; ++i) J(i, nf) = fT[freeidx[i]];
            for (std::size_t j = 0; j < nf; ++j) J(nf, j) = f_seed[freeidx[j]];
            J(nf, nf) = 0.0;
        }
        const auto fac = lu_factor(J);
        if (fac.singular) throw OrbitNotFound("orbit not found: singular shooting Jacobian");
        const Vector step = fac.solve(res);

        // damped update: back off while the trial escapes or grows the residual
        double alpha = 1.0;
        bool moved = false;
        for (int half = 0; half < 10; ++half, alpha *= 0.5) {
            Vector xtry = x0;
            double Ttry = T;
            for (std::size_t i = 0; i < nf; ++i) xtry[freeidx[i]] -= alpha * step[i];
            if (opt.free_period) Ttry -= alpha * step[nf];
            Trajectory ttry;
            Vector rtry;
            if (!shoot(xtry, Ttry, ttry, rtry)) continue;
            const double rn = norm_inf(rtry);
            if (rn < resnorm || alpha <= 1.0 / 512) {
                x0 = std::move(xtry);
                T = Ttry;
                traj = std::move(ttry);
                res = std::move(rtry);
                resnorm = rn;
                moved = true;
                break;
            }
        }
        if (!moved) throw OrbitNotFound("orbit not found: no admissible Newton step");
    }

    return ShootingResult{orbit_from_trajectory(std::move(traj), sys), std::move(mono), it,
                          resnorm};
}

}  // namespace etdf
