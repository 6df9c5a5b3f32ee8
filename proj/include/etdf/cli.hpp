#pragma once

// Command-line front end: design | spectrum | simulate | sweep | verify.
// CSV for array data, JSON for verdicts; every output embeds the resolved
// config hash. Identical configs produce byte-identical outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "acceptance.hpp"
#include "config.hpp"
#include "floquet.hpp"
#include "output.hpp"
#include "pipeline.hpp"
#include "simulate.hpp"

namespace etdf {

namespace cli_detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline json complex_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

inline void finish_outputs(const RunConfig& cfg, const fs::path& out) {
    write_text_file(out / "resolved.cfg", cfg.resolved_dump() + "# hash = " + cfg.hash_hex() + "\n");
}

inline int spectrum_mesh(const RunConfig& cfg) { return cfg.get_int("spectrum.mesh", 256); }

inline SpectrumOptions spectrum_options(const RunConfig& cfg) {
    SpectrumOptions so;
    so.rtol = cfg.get_double("tol.rtol", 1e-10);
    so.atol = cfg.get_double("tol.atol", 1e-12);
    so.mu_bound = cfg.get_double("spectrum.mu_bound", 4.0);
    so.seed_margin = cfg.get_int("spectrum.margin", 2);
    return so;
}

inline unsigned sweep_threads() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ETDF_NUM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return hw;
}

// ---------------------------------------------------------------------------

inline int cmd_design(const RunConfig& cfg, const fs::path& out) {
    const ResolvedModel rm = build_model(cfg);
    const Controllability ctr = controllability(rm.P0, rm.b0);
    std::cout << "model: " << rm.name << "   (n = " << rm.system.n
              << ", T = " << format_sci(rm.orbit.period()) << ")\n";
    std::cout << "controllability det = " << format_sci(ctr.det)
              << "   krylov cond = " << format_sci(ctr.cond) << "\n";
    const ResolvedDesign rd = build_design(cfg, rm);  // throws when uncontrollable

    json j;
    j["model"] = rm.name;
    j["controllability_det"] = ctr.det;
    j["krylov_condition"] = ctr.cond;
    j["K0"] = rd.design.K0;
    if (rd.report) {
        json ach = json::array();
        for (const Complex& z : rd.report->achieved) ach.push_back(complex_json(z));
        j["achieved_spectrum"] = ach;
        j["max_residual"] = rd.report->max_residual;
    }
    json tg = json::array();
    for (const Complex& z : rd.design.targets) tg.push_back(complex_json(z));
    j["targets"] = tg;
    j["config_hash"] = cfg.hash_hex();
    write_text_file(out / "design.json", j.dump(2) + "\n");
    finish_outputs(cfg, out);

    std::cout << "K0 =";
    for (double k : rd.design.K0) std::cout << " " << format_sci(k);
    std::cout << "\n";
    if (rd.report) {
        std::cout << "achieved spectrum of P0 exp(-b K0^T):\n";
        for (const Complex& z : rd.report->achieved)
            std::cout << "  " << format_sci(z.real()) << " " << format_sci(z.imag()) << "i\n";
        std::cout << "max residual vs targets = " << format_sci(rd.report->max_residual) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

inline int cmd_spectrum(const RunConfig& cfg, const fs::path& out, bool json_rows) {
    const ResolvedModel rm = build_model(cfg);
    const ResolvedDesign rd = build_design(cfg, rm);
    const SpectrumOptions so = spectrum_options(cfg);
    const int mesh = spectrum_mesh(cfg);

    const FloquetSpectrum sc = spectrum_char(rm.lin, rd.design, so);
    const FloquetSpectrum sop =
        operator_spectrum(rm.lin, rd.design, static_cast<std::size_t>(mesh), so);
    const CVector asym =
        asymptotic_delay_multipliers(rd.design.K0, rm.b0, rd.design.epsilon, so.seed_margin);

    const std::string hash = cfg.hash_hex();
    CsvWriter csv({"re", "im", "class", "method", "residual", "config_hash"});
    auto add = [&](const FloquetSpectrum& sp) {
        for (const auto& m : sp.multipliers)
            csv.add_row({format_sci(m.value.real()), format_sci(m.value.imag()),
                         to_string(m.cls), to_string(sp.method), format_sci(m.residual), hash});
    };
    add(sc);
    add(sop);
    for (const Complex& z : asym)
        csv.add_row({format_sci(z.real()), format_sci(z.imag()),
                     std::abs(z - 1.0) < 1e-14 ? "trivial" : "delay_induced", "asymptotic",
                     format_sci(0.0), hash});
    csv.write(out / "spectrum.csv");

    json j;
    j["stable"] = sc.stable();
    j["max_nontrivial_modulus"] = sc.max_nontrivial_modulus();
    j["n_char_roots"] = sc.multipliers.size();
    j["n_operator_eigenvalues"] = sop.multipliers.size();
    j["warnings"] = sc.warnings;
    json unres = json::array();
    for (const Complex& z : sc.unresolved_seeds) unres.push_back(complex_json(z));
    j["unresolved_seeds"] = unres;
    if (json_rows) {
        json rows = json::array();
        auto addj = [&](const FloquetSpectrum& sp) {
            for (const auto& m : sp.multipliers)
                rows.push_back({{"re", m.value.real()},
                                {"im", m.value.imag()},
                                {"class", to_string(m.cls)},
                                {"method", to_string(sp.method)},
                                {"residual", m.residual}});
        };
        addj(sc);
        addj(sop);
        j["multipliers"] = rows;
    }
    j["config_hash"] = hash;
    write_text_file(out / "spectrum.json", j.dump(2) + "\n");
    finish_outputs(cfg, out);

    std::cout << "stable = " << (sc.stable() ? "true" : "false")
              << "   max nontrivial |lambda| = " << format_sci(sc.max_nontrivial_modulus())
              << "\n";
    for (const std::string& w : sc.warnings) std::cout << "warning: " << w << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg, const fs::path& out, bool json_rows) {
    const ResolvedModel rm = build_model(cfg);
    const ResolvedDesign rd = build_design(cfg, rm);

    const int periods = cfg.get_int("sim.periods", 80);
    const double amp = cfg.get_double("sim.perturbation", 1e-3);
    const std::string protocol = cfg.get_string("sim.protocol", "knock");
    const int hist_mesh = cfg.get_int("sim.history_mesh", 512);

    HistoryState init;
    if (protocol == "knock")
        init = HistoryState::from_orbit_knocked(rm.orbit, amp, hist_mesh);
    else if (protocol == "displace")
        init = HistoryState::from_orbit_perturbed(rm.orbit, amp, hist_mesh);
    else if (protocol == "none")
        init = HistoryState::from_orbit(rm.orbit, hist_mesh);
    else
        throw ConfigError("sim.protocol must be knock | displace | none");

    SimOptions so;
    so.rtol = cfg.get_double("tol.rtol", 1e-10);
    so.atol = cfg.get_double("tol.atol", 1e-12);
    so.backbone = cfg.get_int("sim.backbone", 1024);
    so.samples_per_period = cfg.get_int("sim.samples", 64);
    so.escape_radius = cfg.get_double("sim.escape", 0.0);

    const SimResult r = simulate(rm.system, rm.orbit, rd.design, init, periods, so);

    const std::string hash = cfg.hash_hex();
    {
        std::vector<std::string> header{"t"};
        for (std::size_t i = 1; i <= rm.system.n; ++i) header.push_back("x" + std::to_string(i));
        for (std::size_t i = 1; i <= rm.system.n; ++i)
            header.push_back("xtilde" + std::to_string(i));
        header.push_back("config_hash");
        CsvWriter csv(header);
        for (std::size_t k = 0; k < r.t.size(); ++k) {
            std::vector<std::string> row{format_sci(r.t[k])};
            for (double v : r.x[k]) row.push_back(format_sci(v));
            for (double v : r.xtilde[k]) row.push_back(format_sci(v));
            row.push_back(hash);
            csv.add_row(std::move(row));
        }
        csv.write(out / "trajectory.csv");
    }
    {
        json j;
        j["converged"] = r.diag.converged;
        j["diverged"] = r.diag.diverged;
        j["diverged_period"] = r.diag.diverged_period;
        if (std::isfinite(r.diag.decay_estimate)) j["decay_estimate"] = r.diag.decay_estimate;
        j["initial_consistency_defect"] = r.diag.initial_consistency_defect;
        json per = json::array();
        for (const auto& p : r.diag.periods)
            per.push_back({{"max_u", p.max_u}, {"orbit_dist", p.orbit_dist}, {"s_star", p.s_star}});
        j["periods"] = per;
        if (!r.diag.periods.empty()) {
            j["first_max_u"] = r.diag.periods.front().max_u;
            j["final_max_u"] = r.diag.periods.back().max_u;
        }
        if (json_rows) {
            json rows = json::array();
            for (std::size_t k = 0; k < r.t.size(); ++k)
                rows.push_back({{"t", r.t[k]}, {"x", r.x[k]}, {"xtilde", r.xtilde[k]}});
            j["trajectory"] = rows;
        }
        j["config_hash"] = hash;
        write_text_file(out / "diagnostics.json", j.dump(2) + "\n");
    }
    finish_outputs(cfg, out);

    if (r.diag.diverged)
        std::cout << "diverged at period " << r.diag.diverged_period << "\n";
    else
        std::cout << "converged = " << (r.diag.converged ? "true" : "false")
                  << "   decay estimate = "
                  << (std::isfinite(r.diag.decay_estimate) ? format_sci(r.diag.decay_estimate)
                                                           : std::string("n/a"))
                  << "\n";
    return 0;  // divergence is a valid scientific result
}

// ---------------------------------------------------------------------------

struct SweepRow {
    double p = 0, epsilon = 0, delta = 0;
    Vector K0;
    bool stable = false;
    double max_nontrivial = 0, max_delay = 0;
    std::string error;
};

inline int cmd_sweep(const RunConfig& cfg, const fs::path& out) {
    if (cfg.get_string("model", "hopf") != "hopf")
        throw ConfigError("sweep currently supports the hopf model only");
    const std::vector<double> pgrid = cfg.get_grid("sweep.p", "-0.5 : -0.05 : 20");
    const std::vector<double> egrid = cfg.get_grid("sweep.epsilon", "");
    const std::vector<double> dgrid = cfg.get_grid("sweep.delta", "");
    const double eps_default = cfg.get_double("control.epsilon", 0.04);
    const std::string gains_mode = cfg.get_string("control.gains", "auto");
    const CVector targets = cfg.get_complex_list("targets", "0+0.5i, 0-0.5i");
    const SpectrumOptions so = spectrum_options(cfg);

    struct Point {
        double p, eps;
        std::string delta_spec;
        double delta_abs;  // <= 0: use spec string
    };
    std::vector<Point> points;
    const std::vector<double> eff_e = egrid.empty() ? std::vector<double>{eps_default} : egrid;
    const std::string delta_default = cfg.get_string("control.delta", "T/500");
    for (double p : pgrid)
        for (double e : eff_e) {
            if (dgrid.empty())
                points.push_back({p, e, delta_default, -1.0});
            else
                for (double dd : dgrid) points.push_back({p, e, "", dd});
        }

    // config resolution happens before the workers start; RunConfig caches
    // resolved values and is not thread-safe
    const std::string gating_str = cfg.get_string("control.gating", "state");
    const Gating gating_mode = gating_str == "time"       ? Gating::time_gated
                               : gating_str == "constant" ? Gating::constant_gain
                                                          : Gating::state_gated;
    const Vector fixed_gains =
        gains_mode == "auto" ? Vector{} : cfg.get_double_list("control.gains", {});
    const double rho = cfg.get_double("control.rho", 0.3);

    std::vector<SweepRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            const Point& pt = points[i];
            SweepRow& row = rows[i];
            row.p = pt.p;
            row.epsilon = pt.eps;
            try {
                const HopfModel m = hopf_system(pt.p);
                const Matrix P0 = monodromy_uncontrolled(m.lin, so.rtol, so.atol);
                const Vector b0 = m.lin.b(0.0);
                GainDesign d;
                d.gating = gating_mode;
                d.epsilon = pt.eps;
                const double T = m.orbit.period();
                d.delta = pt.delta_abs > 0 ? pt.delta_abs
                                           : RunConfig::parse_delta_spec(pt.delta_spec, T);
                row.delta = d.delta;
                d.rho = rho;
                d.targets = targets;
                if (gains_mode == "auto") {
                    const GainReport rep = design_etdf_gains(P0, b0, targets);
                    d.K0 = rep.K0;
                } else {
                    d.K0 = fixed_gains;  // fixed gains reused at every grid point
                }
                row.K0 = d.K0;
                const FloquetSpectrum sp = spectrum_char(m.lin, d, so);
                row.stable = sp.stable();
                row.max_nontrivial = sp.max_nontrivial_modulus();
                for (const auto& mm : sp.multipliers)
                    if (mm.cls == MultiplierClass::delay_induced)
                        row.max_delay = std::max(row.max_delay, std::abs(mm.value));
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const unsigned nthreads = std::min<unsigned>(sweep_threads(),
                                                 std::max<std::size_t>(points.size(), 1));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    const std::string hash = cfg.hash_hex();
    CsvWriter csv({"p", "epsilon", "delta", "K1", "K2", "stable", "max_nontrivial_modulus",
                   "max_delay_modulus", "error", "config_hash"});
    for (const SweepRow& r : rows) {
        csv.add_row({format_sci(r.p), format_sci(r.epsilon), format_sci(r.delta),
                     r.K0.size() > 0 ? format_sci(r.K0[0]) : "",
                     r.K0.size() > 1 ? format_sci(r.K0[1]) : "",
                     r.error.empty() ? (r.stable ? "true" : "false") : "",
                     r.error.empty() ? format_sci(r.max_nontrivial) : "",
                     r.error.empty() ? format_sci(r.max_delay) : "", r.error, hash});
    }
    csv.write(out / "sweep.csv");
    finish_outputs(cfg, out);
    std::cout << "sweep: " << rows.size() << " grid points -> " << (out / "sweep.csv").string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

inline int cmd_verify() {
    const std::vector<CriterionResult> results = run_acceptance();
    bool all = true;
    for (const auto& r : results) {
        std::cout << "criterion " << r.index << " [" << (r.pass ? "PASS" : "FAIL") << "] "
                  << r.name << ": " << r.detail << "\n";
        all = all && r.pass;
    }
    std::cout << (all ? "all criteria passed" : "some criteria FAILED") << "\n";
    return all ? 0 : 3;
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args) {
    using namespace cli_detail;
    CLI::App app{"impulse-gain design, Floquet analysis and closed-loop simulation for "
                 "extended time-delayed feedback control of periodic orbits"};
    app.require_subcommand(1);

    std::string config_path, model, targets, delta, gating, out_dir = "out", format = "csv";
    double p = 0, epsilon = 0, rho = 0;
    int mesh = 0;
    app.add_option("--config", config_path, "configuration file");
    auto* o_model = app.add_option("--model", model, "hopf | pendulum | generic");
    auto* o_p = app.add_option("--p", p, "hopf bifurcation parameter (p < 0)");
    auto* o_targets = app.add_option("--targets", targets, "target multipliers, e.g. 0+0.5i,0-0.5i");
    auto* o_eps = app.add_option("--epsilon", epsilon, "memory parameter in (0,1)");
    auto* o_delta = app.add_option("--delta", delta, "impulse width (absolute or T/<div>)");
    auto* o_rho = app.add_option("--rho", rho, "state-gate radius");
    auto* o_gating = app.add_option("--gating", gating, "time | state | constant");
    auto* o_mesh = app.add_option("--mesh", mesh, "operator discretization mesh size");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", format, "csv | json (csv also writes the JSON verdicts)");
    app.fallthrough();

    auto* c_design = app.add_subcommand("design", "controllability test and gain design");
    auto* c_spectrum = app.add_subcommand("spectrum", "closed-loop Floquet spectrum");
    auto* c_simulate = app.add_subcommand("simulate", "nonlinear closed-loop simulation");
    auto* c_sweep = app.add_subcommand("sweep", "grid sweep over p and/or (epsilon, delta)");
    auto* c_verify = app.add_subcommand("verify", "run the acceptance suite");

    std::vector<const char*> argv;
    argv.push_back("etdf");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
        if (o_model->count()) cfg.set("model", model);
        if (o_p->count()) cfg.set("hopf.p", std::to_string(p));
        if (o_targets->count()) cfg.set("targets", targets);
        if (o_eps->count()) cfg.set("control.epsilon", std::to_string(epsilon));
        if (o_delta->count()) cfg.set("control.delta", delta);
        if (o_rho->count()) cfg.set("control.rho", std::to_string(rho));
        if (o_gating->count()) cfg.set("control.gating", gating);
        if (o_mesh->count()) cfg.set("spectrum.mesh", std::to_string(mesh));
        if (format != "csv" && format != "json")
            throw ConfigError("--format must be csv or json");

        if (c_verify->parsed()) return cmd_verify();

        const std::filesystem::path out(out_dir);
        std::filesystem::create_directories(out);
        const bool json_rows = (format == "json");
        if (c_design->parsed()) return cmd_design(cfg, out);
        if (c_spectrum->parsed()) return cmd_spectrum(cfg, out, json_rows);
        if (c_simulate->parsed()) return cmd_simulate(cfg, out, json_rows);
        if (c_sweep->parsed()) return cmd_sweep(cfg, out);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ExprError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UncontrollableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace etdf
