#pragma once

// Nonlinear closed-loop simulation by method of steps. The delay is exactly
// one period, so x̃ is a pure difference relation driven by the previous
// period: per period, x is advanced by the ODE with the stored histories as
// forcing, then x̃ is materialised on a fixed per-period mesh (values and
// derivatives, cubic Hermite in between). The mesh carries extra nodes inside
// the impulse windows where x inherits fast features from the gate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "design.hpp"
#include "gate.hpp"
#include "impulse.hpp"
#include "linalg.hpp"
#include "ode.hpp"
#include "system.hpp"

namespace etdf {

// ============================================================================
// History containers
// ============================================================================

// Initial data on [-T, 0]: uniform mesh, x and x̃ samples. x_start, when set,
// is the state right after an impulsive disturbance at t = 0 (it may differ
// from x_hist.back(); the histories are what the delay line replays).
struct HistoryState {
    double T = 0;
    std::vector<double> mesh;  // uniform grid on [-T, 0]
    std::vector<Vector> x_hist;
    std::vector<Vector> xtilde_hist;
    Vector x_start;  // empty: continue from x_hist.back()

    static HistoryState from_orbit(const PeriodicOrbit& orbit, std::size_t N = 512) {
        return from_function(orbit.period(), [&](double t) { return orbit.x(t); }, N);
    }

    // histories on the orbit, current state knocked off radially by amp
    static HistoryState from_orbit_knocked(const PeriodicOrbit& orbit, double amp,
                                           std::size_t N = 512) {
        HistoryState h = from_orbit(orbit, N);
        const Vector c = orbit.centroid();
        Vector x = h.x_hist.back();
        double nrm = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = x[i] - c[i];
            nrm += e * e;
        }
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += amp * (x[i] - c[i]) / nrm;
        h.x_start = std::move(x);
        return h;
    }

    // orbit displaced radially (away from the orbit centroid) by `amp`
    static HistoryState from_orbit_perturbed(const PeriodicOrbit& orbit, double amp,
                                             std::size_t N = 512) {
        const Vector c = orbit.centroid();
        auto f = [&orbit, c, amp](double t) {
            Vector x = orbit.x(t);
            Vector dir(x.size());
            double nrm = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                dir[i] = x[i] - c[i];
                nrm += dir[i] * dir[i];
            }
            nrm = std::sqrt(nrm);
            if (nrm < 1e-12) return x;
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += amp * dir[i] / nrm;
            return x;
        };
        return from_function(orbit.period(), f, N);
    }

    static HistoryState from_function(double T, const std::function<Vector(double)>& f,
                                      std::size_t N = 512) {
        HistoryState h;
        h.T = T;
        h.mesh.resize(N);
        for (std::size_t j = 0; j < N; ++j) {
            h.mesh[j] = -T + T * static_cast<double>(j) / static_cast<double>(N - 1);
            h.x_hist.push_back(f(h.mesh[j]));
        }
        h.xtilde_hist = h.x_hist;  // consistent start by default
        return h;
    }

    // |x̃(0) - (1-ε)x̃(-T) - ε x(-T)|: zero on the phase-space constraint
    double consistency_defect(double epsilon) const {
        const Vector& a = xtilde_hist.back();
        const Vector& b = xtilde_hist.front();
        const Vector& c = x_hist.front();
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double e = a[i] - (1 - epsilon) * b[i] - epsilon * c[i];
            s += e * e;
        }
        return std::sqrt(s);
    }
};

namespace detail {

// Cubic Hermite series on a fixed nonuniform node set.
class HermiteSeries {
public:
    HermiteSeries() = default;
    HermiteSeries(std::vector<double> t, std::vector<Vector> y, std::vector<Vector> dy)
        : t_(std::move(t)), y_(std::move(y)), dy_(std::move(dy)) {}

    bool empty() const { return t_.empty(); }
    const std::vector<double>& nodes() const { return t_; }
    const Vector& value(std::size_t j) const { return y_[j]; }
    const Vector& deriv(std::size_t j) const { return dy_[j]; }

    void eval_into(double t, Vector& out) const {
        const auto [k, s, h] = locate(t);
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        const Vector &y0 = y_[k], &y1 = y_[k + 1], &d0 = dy_[k], &d1 = dy_[k + 1];
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = h00 * y0[i] + h * h10 * d0[i] + h01 * y1[i] + h * h11 * d1[i];
    }

    void derivative_into(double t, Vector& out) const {
        const auto [k, s, h] = locate(t);
        const double s2 = s * s;
        const double g00 = (6 * s2 - 6 * s) / h, g10 = 3 * s2 - 4 * s + 1;
        const double g01 = (-6 * s2 + 6 * s) / h, g11 = 3 * s2 - 2 * s;
        const Vector &y0 = y_[k], &y1 = y_[k + 1], &d0 = dy_[k], &d1 = dy_[k + 1];
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = g00 * y0[i] + g10 * d0[i] + g01 * y1[i] + g11 * d1[i];
    }

private:
    std::tuple<std::size_t, double, double> locate(double t) const {
        const std::size_t m = t_.size();
        const double tc = std::clamp(t, t_.front(), t_.back());
        auto it = std::upper_bound(t_.begin(), t_.end(), tc);
        std::size_t k = static_cast<std::size_t>(it - t_.begin());
        k = (k == 0) ? 0 : k - 1;
        if (k >= m - 1) k = m - 2;
        const double h = t_[k + 1] - t_[k];
        return {k, (tc - t_[k]) / h, h};
    }

    std::vector<double> t_;
    std::vector<Vector> y_, dy_;
};

// Per-period node set on [0, T]: uniform backbone plus refinement inside the
// impulse windows (where the closed-loop x has features on scales δ and δ²).
inline std::vector<double> period_mesh(double T, const ImpulseProfile& prof, int backbone,
                                       int window_points, int ramp_points) {
    std::vector<double> t;
    for (int j = 0; j <= backbone; ++j) t.push_back(T * j / backbone);
    const double d = prof.delta, d2 = prof.delta * prof.delta;
    for (int j = 0; j <= window_points; ++j)
        if (window_points > 0) t.push_back(d * j / window_points);
    for (int j = 0; j <= ramp_points; ++j)
        if (ramp_points > 0) {
            t.push_back(d + d2 * j / ramp_points);
            t.push_back(T - d2 + d2 * j / ramp_points);
        }
    std::sort(t.begin(), t.end());
    std::vector<double> out;
    const double tol = 1e-13 * T;
    for (double v : t)
        if (out.empty() || v > out.back() + tol) out.push_back(v);
    out.back() = T;
    return out;
}

}  // namespace detail

// ============================================================================
// Diagnostics
// ============================================================================

struct PeriodDiagnostics {
    double max_u = 0;        // largest |u| seen over the period
    double orbit_dist = 0;   // sup_t |x(t) - x_*(t + s*)| after phase alignment
    double s_star = 0;       // aligning phase shift
};

struct SimDiagnostics {
    std::vector<PeriodDiagnostics> periods;
    bool diverged = false;
    int diverged_period = -1;
    bool converged = false;
    double decay_estimate = std::numeric_limits<double>::quiet_NaN();
    double initial_consistency_defect = 0;
};

struct SimOptions {
    int backbone = 1024;      // per-period uniform history nodes (>= 200 required)
    int window_points = 48;   // extra nodes across the impulse plateau
    int ramp_points = 12;     // extra nodes across each δ² ramp
    double rtol = 1e-10;
    double atol = 1e-12;
    double escape_radius = 0;  // 0: 10 x orbit diameter
    int samples_per_period = 64;
};

struct SimResult {
    std::vector<double> t;       // downsampled output grid
    std::vector<Vector> x;
    std::vector<Vector> xtilde;
    SimDiagnostics diag;
};

// ============================================================================
// Phase alignment and decay estimation
// ============================================================================

// s* minimising ∫₀ᵀ |x(τ) - x_*(τ + s)|² dτ over s ∈ [0, T): 64-point coarse
// scan refined by golden-section.
inline double phase_align(const std::function<Vector(double)>& x_of_local_t,
                          const PeriodicOrbit& orbit) {
    const double T = orbit.period();
    constexpr int M = 256;
    std::vector<Vector> xs(M);
    for (int k = 0; k < M; ++k) xs[k] = x_of_local_t(T * k / M);
    auto J = [&](double s) {
        double acc = 0;
        for (int k = 0; k < M; ++k) {
            const Vector xo = orbit.x(T * k / M + s);
            for (std::size_t i = 0; i < xo.size(); ++i) {
                const double e = xs[k][i] - xo[i];
                acc += e * e;
            }
        }
        return acc;
    };
    int best = 0;
    double bestJ = std::numeric_limits<double>::infinity();
    constexpr int coarse = 64;
    for (int k = 0; k < coarse; ++k) {
        const double v = J(T * k / coarse);
        if (v < bestJ) {
            bestJ = v;
            best = k;
        }
    }
    double a = T * (best - 1) / coarse, b = T * (best + 1) / coarse;
    const double gr = (std::sqrt(5.0) - 1) / 2;
    double c = b - gr * (b - a), dpt = a + gr * (b - a);
    double Jc = J(c), Jd = J(dpt);
    while (b - a > 1e-7 * T) {
        if (Jc < Jd) {
            b = dpt;
            dpt = c;
            Jd = Jc;
            c = b - gr * (b - a);
            Jc = J(c);
        } else {
            a = c;
            c = dpt;
            Jc = Jd;
            dpt = a + gr * (b - a);
            Jd = J(dpt);
        }
    }
    double s = 0.5 * (a + b);
    s = std::fmod(s, T);
    if (s < 0) s += T;
    return s;
}

inline double decay_fit_window(const std::vector<double>& logd, std::size_t a, std::size_t b) {
    const double n = static_cast<double>(b - a);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = a; k < b; ++k) {
        const double x = static_cast<double>(k);
        sx += x;
        sy += logd[k];
        sxx += x * x;
        sxy += x * logd[k];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return std::exp(slope);
}

// Least-squares slope of log(orbit distance) vs period index over the middle
// half of the usable window, skipping the initial transient and the late
// measurement-noise plateau (converged runs bottom out at the phase-alignment
// resolution long before the hard floor); returns e^{slope}, the empirical
// dominant multiplier modulus.
inline double estimate_decay(const SimDiagnostics& diag, double floor_dist = 1e-13) {
    std::vector<double> logd;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : diag.periods) {
        if (p.orbit_dist < floor_dist) break;  // floor reached: truncate fit window
        logd.push_back(std::log(p.orbit_dist));
        lo = std::min(lo, p.orbit_dist);
    }
    const std::size_t m = logd.size();
    if (m < 5) throw std::runtime_error("estimate_decay: need >= 5 periods of usable data");
    // trim everything within a factor 30 of the smallest distance (plateau)
    const double thr = std::log(30.0 * lo);
    std::size_t mt = 0;
    while (mt < m && logd[mt] >= thr) ++mt;
    const std::size_t use = (mt >= 10) ? mt : m;
    const std::size_t start = use / 4;
    const std::size_t end = (3 * use) / 4;
    if (end < start + 5) return decay_fit_window(logd, 0, use);  // short run: use everything
    return decay_fit_window(logd, start, end);
}

// ============================================================================
// Simulation driver
// ============================================================================

namespace detail {
struct EscapeSignal {};
}  // namespace detail

inline SimResult simulate(const ControlledSystem& sys, const PeriodicOrbit& orbit,
                          const GainDesign& design, const HistoryState& init, int n_periods,
                          const SimOptions& opt = {}) {
    const double T = orbit.period();
    const std::size_t n = sys.n;
    design.validate(T);
    if (opt.backbone < 200)
        throw std::invalid_argument("simulate: history mesh needs >= 200 points per period");
    if (init.mesh.size() < 8 || init.x_hist.size() != init.mesh.size() ||
        init.xtilde_hist.size() != init.mesh.size())
        throw std::invalid_argument("simulate: malformed initial history");
    {
        const double h0 = (init.mesh.back() - init.mesh.front()) /
                          static_cast<double>(init.mesh.size() - 1);
        for (std::size_t j = 1; j < init.mesh.size(); ++j)
            if (std::abs(init.mesh[j] - init.mesh[j - 1] - h0) > 1e-9 * T)
                throw std::invalid_argument("simulate: initial history mesh must be uniform");
    }

    const double eps = design.epsilon;
    const bool constant = (design.gating == Gating::constant_gain);
    ImpulseProfile gate_prof;  // time gate, possibly detuned
    ImpulseProfile mesh_prof{std::max(design.delta, 1e-6), T, true};
    if (design.gating == Gating::time_gated) gate_prof = design.profile(T);
    if (!constant) mesh_prof = ImpulseProfile{design.delta, T, design.regularised_impulse};

    SimResult result;
    result.diag.initial_consistency_defect = init.consistency_defect(eps);

    const double escape =
        (opt.escape_radius > 0) ? opt.escape_radius : 10.0 * std::max(orbit.diameter(), 1e-6);

    // fixed per-period mesh (local time in [0, T])
    const std::vector<double> mesh =
        constant ? detail::period_mesh(T, ImpulseProfile{T / 4, T, false}, opt.backbone, 0, 0)
                 : detail::period_mesh(T, mesh_prof, opt.backbone, opt.window_points,
                                       opt.ramp_points);

    // initial histories as Hermite series with 4th-order FD derivatives
    // node derivatives by 4th-order differences (5-point one-sided stencils at
    // the ends: the impulse window reads the history right at the endpoints)
    auto make_initial = [&](const std::vector<Vector>& vals) {
        const std::size_t M = init.mesh.size();
        const double h = (init.mesh.back() - init.mesh.front()) / static_cast<double>(M - 1);
        std::vector<Vector> dv(M, Vector(n));
        auto stencil = [&](std::size_t j, std::size_t base, const double (&c)[5]) {
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (int k = 0; k < 5; ++k) s += c[k] * vals[base + k][i];
                dv[j][i] = s / (12 * h);
            }
        };
        static constexpr double fwd0[5] = {-25, 48, -36, 16, -3};
        static constexpr double fwd1[5] = {-3, -10, 18, -6, 1};
        static constexpr double bwd1[5] = {-1, 6, -18, 10, 3};
        static constexpr double bwd0[5] = {3, -16, 36, -48, 25};
        for (std::size_t j = 0; j < M; ++j) {
            if (j == 0)
                stencil(j, 0, fwd0);
            else if (j == 1)
                stencil(j, 0, fwd1);
            else if (j + 2 == M)
                stencil(j, M - 5, bwd1);
            else if (j + 1 == M)
                stencil(j, M - 5, bwd0);
            else
                for (std::size_t i = 0; i < n; ++i)
                    dv[j][i] = (-vals[j + 2][i] + 8 * vals[j + 1][i] - 8 * vals[j - 1][i] +
                                vals[j - 2][i]) /
                               (12 * h);
        }
        return detail::HermiteSeries(init.mesh, vals, dv);
    };
    detail::HermiteSeries prev_xtilde = make_initial(init.xtilde_hist);
    detail::HermiteSeries prev_x_hermite = make_initial(init.x_hist);
    Trajectory prev_x_traj;  // dense trajectory of the previous period (periods >= 1)
    bool have_prev_traj = false;

    Vector x_now = init.x_start.empty() ? init.x_hist.back() : init.x_start;
    if (x_now.size() != n) throw std::invalid_argument("simulate: x_start dimension mismatch");

    Vector scratch_prev(n), scratch_tilde(n);
    // x̃ on the current period: (1-ε) x̃_prev(t-T) + ε x_prev(t-T), both in the
    // previous period's local time
    auto xtilde_at = [&](double local_t, Vector& out) {
        prev_xtilde.eval_into(have_prev_traj ? local_t : local_t - T, scratch_tilde);
        if (have_prev_traj)
            prev_x_traj.eval_into(prev_x_traj.t_begin() + local_t, scratch_prev.data());
        else
            prev_x_hermite.eval_into(local_t - T, scratch_prev);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = (1 - eps) * scratch_tilde[i] + eps * scratch_prev[i];
    };

    auto gate_value = [&](double abs_t, const Vector& x) {
        switch (design.gating) {
            case Gating::time_gated: return gate_prof.value(abs_t);
            case Gating::state_gated: return state_gate(x, orbit, design);
            default: return 1.0;
        }
    };

    const int samples = std::max(opt.samples_per_period, 4);
    Vector xt_out(n);
    const double escape2 = escape * escape;

    for (int period = 0; period < n_periods; ++period) {
        const double t0 = period * T;
        Vector xwork(n), xtl(n);
        auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
            double r2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                xwork[i] = y[i];
                r2 += y[i] * y[i];
            }
            if (r2 > escape2) throw detail::EscapeSignal{};
            xtilde_at(t - t0, xtl);
            const double g = gate_value(t, xwork);
            double u = 0;
            if (g != 0.0) {
                double feed = 0;
                for (std::size_t i = 0; i < n; ++i) feed += design.K0[i] * (xtl[i] - y[i]);
                u = g * feed;
            }
            const Vector fx = sys.f(xwork, u);
            for (std::size_t i = 0; i < n; ++i) dy[i] = fx[i];
        };

        IntegrateOptions iopt;
        iopt.rtol = opt.rtol;
        iopt.atol = opt.atol;
        if (design.gating == Gating::time_gated) {
            iopt.breakpoints = gate_prof.breakpoints(t0, t0 + T);
            for (double tm : mesh) {  // x̃ feature nodes inside the windows
                const double tau = mesh_prof.local_time(tm);
                const double d2 = design.delta * design.delta;
                if (tau <= design.delta + d2 || tau >= T - d2) {
                    const double abs_tm = t0 + tm;
                    if (abs_tm > t0 && abs_tm < t0 + T) iopt.breakpoints.push_back(abs_tm);
                }
            }
        } else if (design.gating == Gating::state_gated) {
            iopt.max_step = design.delta / 2;  // the gate must not be stepped over
        } else {
            iopt.max_step = T / 64;
        }

        Trajectory traj;
        bool escaped = false;
        try {
            traj = integrate(rhs, t0, t0 + T, x_now, iopt);
        } catch (const detail::EscapeSignal&) {
            escaped = true;
        } catch (const IntegrationError&) {
            escaped = true;  // finite-time blowup inside the period
        }
        if (escaped) {
            result.diag.diverged = true;
            result.diag.diverged_period = period;
            break;
        }

        // ---- diagnostics -------------------------------------------------
        PeriodDiagnostics pd;
        auto consider_u = [&](double abs_t, const Vector& xv) {
            xtilde_at(abs_t - t0, xtl);
            const double g = gate_value(abs_t, xv);
            if (g == 0.0) return;
            double feed = 0;
            for (std::size_t i = 0; i < n; ++i) feed += design.K0[i] * (xtl[i] - xv[i]);
            pd.max_u = std::max(pd.max_u, std::abs(g * feed));
        };
        for (double tm : mesh)
            if (t0 + tm <= traj.t_end()) consider_u(t0 + tm, traj.eval(t0 + tm));
        for (std::size_t k = 0; k < traj.times().size(); ++k)
            consider_u(traj.times()[k], traj.state(k));

        auto xfun = [&](double local) { return traj.eval(t0 + std::min(local, T)); };
        pd.s_star = phase_align(xfun, orbit);
        double sup = 0;
        for (int k = 0; k <= 128; ++k) {
            const double tau = T * k / 128;
            const Vector xv = traj.eval(t0 + tau);
            const Vector xo = orbit.x(tau + pd.s_star);
            double s2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = xv[i] - xo[i];
                s2 += e * e;
            }
            sup = std::max(sup, std::sqrt(s2));
        }
        pd.orbit_dist = sup;
        result.diag.periods.push_back(pd);

        // ---- output samples ----------------------------------------------
        for (int k = 0; k < samples; ++k) {
            const double tau = T * k / samples;
            result.t.push_back(t0 + tau);
            result.x.push_back(traj.eval(t0 + tau));
            xtilde_at(tau, xt_out);
            result.xtilde.push_back(xt_out);
        }

        // ---- roll histories: x̃' = (1-ε) x̃'_prev + ε x'_prev -----------------
        std::vector<Vector> vals(mesh.size(), Vector(n)), ders(mesh.size(), Vector(n));
        Vector dprev(n), dtilde(n);
        for (std::size_t j = 0; j < mesh.size(); ++j) {
            xtilde_at(mesh[j], vals[j]);
            if (have_prev_traj) {
                prev_x_traj.derivative_into(prev_x_traj.t_begin() + mesh[j], dprev.data());
                dtilde = prev_xtilde.deriv(j);  // meshes are identical period to period
            } else {
                prev_x_hermite.derivative_into(mesh[j] - T, dprev);
                prev_xtilde.derivative_into(mesh[j] - T, dtilde);
            }
            for (std::size_t i = 0; i < n; ++i)
                ders[j][i] = (1 - eps) * dtilde[i] + eps * dprev[i];
        }
        prev_xtilde = detail::HermiteSeries(mesh, std::move(vals), std::move(ders));
        x_now = traj.back();
        prev_x_traj = std::move(traj);
        have_prev_traj = true;
    }

    if (!result.diag.diverged && !result.diag.periods.empty()) {
        const double first = result.diag.periods.front().orbit_dist;
        const double last = result.diag.periods.back().orbit_dist;
        result.diag.converged = last <= first;
        if (result.diag.periods.size() >= 5) {
            try {
                result.diag.decay_estimate = estimate_decay(result.diag);
            } catch (const std::runtime_error&) {
            }
        }
    }
    return result;
}

}  // namespace etdf
