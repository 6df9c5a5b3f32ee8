#pragma once

// Configuration -> model/orbit/linearisation/gains resolution shared by the
// CLI subcommands.

#include <cmath>
#include <optional>
#include <string>

#include "config.hpp"
#include "design.hpp"
#include "expr.hpp"
#include "floquet.hpp"
#include "models.hpp"
#include "shooting.hpp"
#include "system.hpp"

namespace etdf {

struct UncontrollableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResolvedModel {
    std::string name;
    ControlledSystem system;
    PeriodicOrbit orbit;
    Linearization lin;
    Matrix P0;
    Vector b0;
};

inline ResolvedModel build_model(const RunConfig& cfg) {
    ResolvedModel rm;
    rm.name = cfg.get_string("model", "hopf");
    const double rtol = cfg.get_double("tol.rtol", 1e-10);
    const double atol = cfg.get_double("tol.atol", 1e-12);

    if (rm.name == "hopf") {
        const double p = cfg.get_double("hopf.p", -0.25);
        if (!(p < 0))
            throw UncontrollableError(
                "hopf model: no periodic orbit for p >= 0; the pair (P0, b) is "
                "uncontrollable at the Hopf point (P0 = I)");
        HopfModel m = hopf_system(p);
        const std::string source = cfg.get_string("orbit.source", "analytic");
        if (source == "shooting") {
            ShootingOptions so;
            so.tol = cfg.get_double("orbit.tol", 1e-10);
            const auto seed =
                cfg.get_double_list("orbit.seed", {0.0, -0.9 * std::sqrt(-p)});
            const double Tg = cfg.get_double("orbit.T_guess", 6.0);
            ShootingResult res = find_orbit_shooting(m.system, Tg, seed, so);
            // rebase so the anchor matches the analytic section
            rm.orbit = res.orbit.rebased(res.orbit.closest_phase(m.orbit.anchor()));
        } else {
            rm.orbit = m.orbit;
        }
        rm.system = std::move(m.system);
    } else if (rm.name == "pendulum") {
        PendulumParams prm;
        prm.omega0 = cfg.get_double("pendulum.omega0", prm.omega0);
        prm.gamma = cfg.get_double("pendulum.gamma", prm.gamma);
        prm.amplitude = cfg.get_double("pendulum.amplitude", prm.amplitude);
        prm.Omega = cfg.get_double("pendulum.Omega", prm.Omega);
        rm.system = pendulum_system(prm);
        const int mult = cfg.get_int("pendulum.period_multiple", 2);
        const double T = mult * 2 * M_PI / prm.Omega;
        ShootingOptions so;
        so.tol = cfg.get_double("orbit.tol", 1e-10);
        so.free_period = false;
        so.frozen = {2, 3};  // the forcing oscillator states are pinned
        const auto seed = cfg.get_double_list("orbit.seed", {0.7, 0.0, 1.0, 0.0});
        rm.orbit = find_orbit_shooting(rm.system, T, seed, so).orbit;
    } else if (rm.name == "generic") {
        const int dim = cfg.get_int("generic.dim", 0);
        if (dim < 1) throw ConfigError("generic model: generic.dim must be >= 1");
        std::vector<std::shared_ptr<Expr>> fs;
        for (int i = 1; i <= dim; ++i) {
            const std::string key = "generic.f" + std::to_string(i);
            const std::string text = cfg.get_string(key, "");
            if (text.empty()) throw ConfigError("generic model: missing " + key);
            fs.push_back(std::shared_ptr<Expr>(Expr::parse(text, dim).release()));
        }
        rm.system.n = static_cast<std::size_t>(dim);
        rm.system.f = [fs, dim](const Vector& x, double u) {
            Vector out(dim);
            for (int i = 0; i < dim; ++i)
                out[i] = fs[i]->eval(std::span<const double>(x.data(), x.size()), u);
            return out;
        };
        attach_fd_jacobians(rm.system);
        ShootingOptions so;
        so.tol = cfg.get_double("orbit.tol", 1e-10);
        so.free_period = cfg.get_bool("orbit.free_period", true);
        const auto frozen = cfg.get_double_list("orbit.frozen", {});
        for (double f : frozen) so.frozen.push_back(static_cast<std::size_t>(f));
        const auto seed = cfg.get_double_list("orbit.seed", {});
        if (seed.size() != rm.system.n)
            throw ConfigError("generic model: orbit.seed must have generic.dim entries");
        const double Tg = cfg.get_double("orbit.T_guess", 0.0);
        if (!(Tg > 0)) throw ConfigError("generic model: orbit.T_guess must be positive");
        rm.orbit = find_orbit_shooting(rm.system, Tg, seed, so).orbit;
    } else {
        throw ConfigError("unknown model '" + rm.name + "'");
    }

    rm.lin = linearize_along_orbit(rm.system, rm.orbit);
    rm.P0 = monodromy_uncontrolled(rm.lin, rtol, atol);
    rm.b0 = rm.lin.b(0.0);
    return rm;
}

struct ResolvedDesign {
    GainDesign design;
    std::optional<GainReport> report;  // present when gains were designed here
};

inline ResolvedDesign build_design(const RunConfig& cfg, const ResolvedModel& rm) {
    const double T = rm.orbit.period();
    ResolvedDesign rd;
    GainDesign& d = rd.design;
    d.epsilon = cfg.get_double("control.epsilon", 0.04);
    d.delta = cfg.get_delta("control.delta", "T/500", T);
    d.rho = cfg.get_double("control.rho", 0.1 * rm.orbit.diameter());
    d.regularised_impulse = cfg.get_bool("control.regularised", true);
    d.gate_period_scale = cfg.get_double("control.gate_period_scale", 1.0);
    const std::string gating = cfg.get_string("control.gating", "state");
    if (gating == "time")
        d.gating = Gating::time_gated;
    else if (gating == "state")
        d.gating = Gating::state_gated;
    else if (gating == "constant")
        d.gating = Gating::constant_gain;
    else
        throw ConfigError("control.gating must be time | state | constant");
    const std::string section = cfg.get_string("control.section", "implicit");
    if (section == "implicit")
        d.section = SectionVariant::implicit;
    else if (section == "linear")
        d.section = SectionVariant::linear;
    else
        throw ConfigError("control.section must be implicit | linear");
    d.targets = cfg.get_complex_list("targets", "0+0.5i, 0-0.5i");

    const std::string gains = cfg.get_string("control.gains", "auto");
    if (gains == "auto") {
        const Controllability ctr = controllability(rm.P0, rm.b0);
        if (!ctr.controllable())
            throw UncontrollableError("uncontrollable pair (P0, b0): Krylov determinant " +
                                      std::to_string(ctr.det));
        try {
            rd.report = design_etdf_gains(rm.P0, rm.b0, d.targets);
        } catch (const AssignmentError& e) {
            throw UncontrollableError(e.what());
        }
        d.K0 = rd.report->K0;
    } else {
        const auto vals = cfg.get_double_list("control.gains", {});
        if (vals.size() != rm.system.n)
            throw ConfigError("control.gains must list n components or 'auto'");
        d.K0 = vals;
    }
    d.validate(T);
    return rd;
}

}  // namespace etdf
