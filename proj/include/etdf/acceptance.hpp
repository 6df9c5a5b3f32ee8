#pragma once

// Acceptance suite: ten end-to-end criteria over the Hopf benchmark, each with
// its tolerance pinned in code. Runs in well under three minutes; prints one
// pass/fail line per criterion through the callers (CLI `verify`, ctest).

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "design.hpp"
#include "floquet.hpp"
#include "models.hpp"
#include "simulate.hpp"

namespace etdf {

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

namespace acceptance_detail {

struct Fixture {
    HopfModel model = hopf_system(-0.25);
    Matrix P0;
    GainReport report;
    GainDesign design;

    Fixture() {
        P0 = monodromy_uncontrolled(model.lin);
        report = design_etdf_gains(P0, model.lin.b(0.0), {Complex(0, 0.5), Complex(0, -0.5)});
        design.K0 = report.K0;
        design.delta = 2 * M_PI / 500;
        design.epsilon = 0.04;
        design.rho = 0.3;
        design.targets = {Complex(0, 0.5), Complex(0, -0.5)};
        design.gating = Gating::state_gated;
    }
};

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

}  // namespace acceptance_detail

inline std::vector<CriterionResult> run_acceptance() {
    using acceptance_detail::fmt;
    using Clock = std::chrono::steady_clock;
    acceptance_detail::Fixture fx;
    std::vector<CriterionResult> out;

    auto run = [&out](int idx, const std::string& name, auto&& body) {
        CriterionResult r;
        r.index = idx;
        r.name = name;
        const auto t0 = Clock::now();
        try {
            body(r);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail += std::string(" exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        out.push_back(std::move(r));
    };

    // ------------------------------------------------------------------ 1
    run(1, "gain reproduction", [&](CriterionResult& r) {
        const bool k_ok = std::abs(fx.report.K0[0] - (-0.258)) <= 1e-3 &&
                          std::abs(fx.report.K0[1] - 4.786) <= 1e-3;
        const bool spec_ok = fx.report.max_residual <= 1e-9;
        r.pass = k_ok && spec_ok;
        r.detail = "K0 = (" + fmt(fx.report.K0[0]) + ", " + fmt(fx.report.K0[1]) +
                   ") vs (-0.258, 4.786); assigned-spectrum residual " +
                   fmt(fx.report.max_residual);
    });

    // ------------------------------------------------------------------ 2
    run(2, "monodromy oracle", [&](CriterionResult& r) {
        double worst = 0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                worst = std::max(worst,
                                 std::abs(fx.P0(i, j) - fx.model.P0_closed_form(i, j)));
        const bool val_ok = std::abs(std::exp(M_PI) - 23.141) < 5e-4;
        r.pass = (worst <= 1e-7) && val_ok;
        r.detail = "max |P0 - diag(1, e^pi)| = " + fmt(worst) +
                   ", e^pi = " + fmt(std::exp(M_PI));
    });

    // ------------------------------------------------------------------ 3
    FloquetSpectrum bench_spec;
    run(3, "spectrum reproduction", [&](CriterionResult& r) {
        const auto t0 = Clock::now();
        bench_spec = spectrum_char(fx.model.lin, fx.design);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

        int n_trivial = 0;
        for (const auto& m : bench_spec.multipliers)
            if (std::abs(m.value - 1.0) <= 1e-6) ++n_trivial;

        // the two roots closest to the targets
        double d_plus = 1e9, d_minus = 1e9;
        const Complex tp(0, 0.5), tm(0, -0.5);
        std::vector<Complex> rest;
        Complex near_p, near_m;
        for (const auto& m : bench_spec.multipliers) {
            if (std::abs(m.value - tp) < d_plus) {
                d_plus = std::abs(m.value - tp);
                near_p = m.value;
            }
            if (std::abs(m.value - tm) < d_minus) {
                d_minus = std::abs(m.value - tm);
                near_m = m.value;
            }
        }
        double circle_worst = 0;
        bool inside = true;
        double max_nontrivial = 0;
        for (const auto& m : bench_spec.multipliers) {
            const bool is_trivial = std::abs(m.value - 1.0) <= 1e-6;
            const bool is_assigned = (m.value == near_p) || (m.value == near_m);
            if (!is_trivial) {
                max_nontrivial = std::max(max_nontrivial, std::abs(m.value));
                if (std::abs(m.value) >= 1.0) inside = false;
            }
            if (!is_trivial && !is_assigned)
                circle_worst = std::max(
                    circle_worst,
                    std::abs(std::abs(m.value - Complex(1 - 0.02, 0)) - 0.02));
        }
        const bool triv_ok = (n_trivial == 1);
        const bool assigned_ok = (d_plus <= 0.05 && d_minus <= 0.05);
        const bool circle_ok = (circle_worst <= 0.02);
        const bool time_ok = (secs < 30.0);
        r.pass = triv_ok && assigned_ok && circle_ok && inside && time_ok;
        r.detail = "trivial count " + std::to_string(n_trivial) + "; target distances " +
                   fmt(d_plus) + "/" + fmt(d_minus) + " (<= 0.05 required; computed pair " +
                   fmt(near_p.real()) + (near_p.imag() < 0 ? "-" : "+") +
                   fmt(std::abs(near_p.imag())) + "i); circle deviation " + fmt(circle_worst) +
                   "; max nontrivial modulus " + fmt(max_nontrivial) + "; " + fmt(secs) + " s";
    });

    // ------------------------------------------------------------------ 4
    run(4, "oracle equivalence", [&](CriterionResult& r) {
        const FloquetSpectrum op = operator_spectrum(fx.model.lin, fx.design, 256);
        double worst = 0;
        for (const Complex& z : bench_spec.values_above(1 - fx.design.epsilon / 2)) {
            double best = 1e9;
            for (const auto& m : op.multipliers) best = std::min(best, std::abs(m.value - z));
            worst = std::max(worst, best);
        }
        const bool match_ok = worst <= 1e-3;

        // Richardson leg: the N^-2 regime needs the gate window resolved by
        // the history mesh, so it runs at delta = T/20 with the same gains
        GainDesign dr = fx.design;
        dr.delta = 2 * M_PI / 20;
        double err[3];
        int k = 0;
        for (std::size_t N : {64, 128, 256}) {
            const FloquetSpectrum o = operator_spectrum(fx.model.lin, dr, N);
            double best = 1e9;
            for (const auto& m : o.multipliers) best = std::min(best, std::abs(m.value - 1.0));
            err[k++] = best;
        }
        const double r1 = err[0] / err[1], r2 = err[1] / err[2];
        const bool rich_ok = (r1 >= 2.5 && r1 <= 6.0 && r2 >= 2.5 && r2 <= 6.0);
        r.pass = match_ok && rich_ok;
        r.detail = "char/operator mismatch above 1-eps/2: " + fmt(worst) +
                   "; trivial-eigenvalue Richardson ratios " + fmt(r1) + ", " + fmt(r2) +
                   " (N^-2 -> ~4)";
    });

    // ------------------------------------------------------------------ 5
    run(5, "delta-limit property", [&](CriterionResult& r) {
        const Matrix limit =
            delta_limit_monodromy(fx.P0, fx.model.lin.b(0.0), fx.design.K0, 1.0);
        double D[3];
        int k = 0;
        for (double frac : {125.0, 250.0, 500.0}) {
            GainDesign d = fx.design;
            d.delta = 2 * M_PI / frac;
            const Matrix P1 = monodromy_closed_loop(fx.model.lin, d, 1.0);
            D[k++] = frobenius_norm(P1 - limit);
        }
        const double r1 = D[1] / D[0], r2 = D[2] / D[1];
        r.pass = std::abs(r1 - 0.5) <= 0.15 && std::abs(r2 - 0.5) <= 0.15;
        r.detail = "norms " + fmt(D[0]) + " -> " + fmt(D[1]) + " -> " + fmt(D[2]) +
                   ", halving ratios " + fmt(r1) + ", " + fmt(r2);
    });

    // ------------------------------------------------------------------ 6
    run(6, "nonlinear stabilisation and non-invasiveness", [&](CriterionResult& r) {
        const HistoryState init = HistoryState::from_orbit_knocked(fx.model.orbit, 1e-3);
        const SimResult sim =
            simulate(fx.model.system, fx.model.orbit, fx.design, init, 600, SimOptions{});
        if (sim.diag.diverged) {
            r.pass = false;
            r.detail = "diverged at period " + std::to_string(sim.diag.diverged_period);
            return;
        }
        const double u0 = sim.diag.periods.front().max_u;
        const double u1 = sim.diag.periods.back().max_u;
        const double decay = sim.diag.decay_estimate;
        const double ref = bench_spec.max_nontrivial_modulus();
        const bool conv_ok = sim.diag.converged;
        const bool u_ok = u1 < 1e-6 * u0;
        const bool decay_ok = std::abs(decay - ref) <= 0.1;
        r.pass = conv_ok && u_ok && decay_ok;
        r.detail = "max|u| " + fmt(u0) + " -> " + fmt(u1) + " (ratio " + fmt(u1 / u0) +
                   "); decay " + fmt(decay) + " vs spectrum " + fmt(ref);
    });

    // ------------------------------------------------------------------ 7
    run(7, "constant-gain impossibility", [&](CriterionResult& r) {
        int unstable = 0, total = 0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                GainDesign d = fx.design;
                d.gating = Gating::constant_gain;
                d.epsilon = 0.02;
                d.K0 = {-2.0 + 0.5 * i, -2.0 + 0.5 * j};  // K1 + K2 <= 0 on the grid
                const FloquetSpectrum sp = spectrum_char(fx.model.lin, d);
                ++total;
                if (!sp.stable()) ++unstable;
            }
        bool signs_ok = true;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                const Vector K{-1.0 + 0.5 * i, -1.0 + 0.5 * j};
                const double ratio = constant_gain_criterion(fx.model.lin, fx.model.orbit, K);
                const double s = K[0] + K[1];
                if (std::abs(s) < 1e-12) {
                    if (std::abs(ratio) > 1e-9) signs_ok = false;
                } else if (ratio * s <= 0) {
                    signs_ok = false;
                }
            }
        r.pass = (unstable == total) && signs_ok;
        r.detail = std::to_string(unstable) + "/" + std::to_string(total) +
                   " constant-gain grid points unstable at eps = 0.02; criterion-ratio sign "
                   "matches sign(K1+K2): " +
                   (signs_ok ? "yes" : "no");
    });

    // ------------------------------------------------------------------ 8
    run(8, "asymptotic formula exactness", [&](CriterionResult& r) {
        const Vector b0 = fx.model.lin.b(0.0);
        const CVector lam = asymptotic_delay_multipliers(fx.design.K0, b0, fx.design.epsilon);
        bool has_exact_one = false;
        double circle_worst = 0;
        for (const Complex& z : lam) {
            if (z == Complex(1.0, 0.0)) has_exact_one = true;
            circle_worst = std::max(
                circle_worst, std::abs(std::abs(z - Complex(1 - 0.02, 0)) - 0.02));
        }
        const KappaRoots kr = kappa_roots(fx.design.K0, b0);
        bool kappa_ok = false;
        for (std::size_t i = 0; i < kr.roots.size(); ++i)
            if (kr.ell[i] == 0 && kr.roots[i] == Complex(1.0, 0.0)) kappa_ok = true;
        r.pass = has_exact_one && kappa_ok && circle_worst < 1e-14;
        r.detail = "lambda_0 exact: " + std::string(has_exact_one ? "yes" : "no") +
                   "; kappa_00 exact: " + std::string(kappa_ok ? "yes" : "no") +
                   "; worst circle deviation " + fmt(circle_worst);
    });

    // ------------------------------------------------------------------ 9
    run(9, "gains vs p qualitative reproduction", [&](CriterionResult& r) {
        bool k1_neg = true;
        for (int i = 0; i < 20; ++i) {
            const double p = -0.5 + (0.45 * i) / 19;
            const HopfModel m = hopf_system(p);
            const GainReport rep = design_etdf_gains(
                monodromy_uncontrolled(m.lin), m.lin.b(0.0), fx.design.targets);
            if (!(rep.K0[0] < 0)) k1_neg = false;
        }
        bool growing = true;
        double prev = 0;
        for (int i = 0; i < 10; ++i) {
            const double p = -0.05 + (0.045 * i) / 9;  // -0.05 ... -0.005
            const HopfModel m = hopf_system(p);
            const GainReport rep = design_etdf_gains(
                monodromy_uncontrolled(m.lin), m.lin.b(0.0), fx.design.targets);
            const double nk = norm2(rep.K0);
            if (i > 0 && !(nk > prev)) growing = false;
            prev = nk;
        }
        r.pass = k1_neg && growing;
        r.detail = std::string("K1 < 0 on [-0.5, -0.05]: ") + (k1_neg ? "yes" : "no") +
                   "; ||K|| strictly increasing toward p -> 0-: " + (growing ? "yes" : "no") +
                   " (||K|| at p=-0.005: " + fmt(prev) + ")";
    });

    // ------------------------------------------------------------------ 10
    run(10, "classical-instability consistency", [&](CriterionResult& r) {
        std::mt19937 rng(20240808);
        std::uniform_real_distribution<double> unif(-3.0, 3.0);
        int found = 0, consistent = 0;
        int draws = 0;
        while (found < 10 && draws < 1000) {
            ++draws;
            GainDesign d = fx.design;
            d.epsilon = 0.02;
            d.K0 = {unif(rng), unif(rng)};
            const FloquetSpectrum cl = classical_spectrum(fx.model.lin, d);
            if (!cl.must_fail_small_epsilon) continue;
            ++found;
            const FloquetSpectrum sp = spectrum_char(fx.model.lin, d);
            if (!sp.stable()) ++consistent;
        }
        r.pass = (found == 10 && consistent == 10);
        r.detail = std::to_string(consistent) + "/" + std::to_string(found) +
                   " classically unstable gain draws also unstable under ETDF at eps = 0.02";
    });

    return out;
}

}  // namespace etdf
