#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlat/config.hpp"
#include "dlat/dispersion.hpp"
#include "dlat/model.hpp"
#include "dlat/simulator.hpp"
#include "dlat/spreading.hpp"
#include "dlat/waves.hpp"

namespace dlat::app {

using nlohmann::json;

inline constexpr const char* version = "0.1.0";

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"check-hypotheses", "speed", "roots", "simulate",
                                                "front-speed", "wave", "wave-scan"};
    return names;
}

// Shortest text that round-trips the double.
inline std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// NaN and infinities are not JSON; they become null.
inline json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

class Context {
public:
    Context(const std::string& sub, const RunConfig& cfg, std::ostream& out)
        : sub_(sub), cfg_(cfg), out_(out), dir_(cfg.output.dir) {
        std::filesystem::create_directories(dir_);
        manifest_ = {{"tool", "dlat"},         {"version", version}, {"subcommand", sub},
                     {"status", "ok"},         {"config", to_json(cfg)}, {"resolved", json::object()},
                     {"results", json::object()}, {"outputs", json::array()}};
    }

    const RunConfig& cfg() const { return cfg_; }
    std::ostream& out() { return out_; }
    json& resolved() { return manifest_["resolved"]; }
    json& results() { return manifest_["results"]; }

    std::ofstream open(const std::string& name) {
        std::ofstream f(dir_ / name);
        if (!f) throw InvalidInput("output_unwritable", "cannot write " + (dir_ / name).string());
        manifest_["outputs"].push_back(name);
        return f;
    }

    void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

    void finish() {
        write_json("manifest.json", manifest_);
        std::error_code ec;
        std::filesystem::remove(dir_ / "error.json", ec);
    }

private:
    std::string sub_;
    const RunConfig& cfg_;
    std::ostream& out_;
    std::filesystem::path dir_;
    json manifest_;
};

namespace detail {

inline json model_summary(const LatticeModel& m) {
    json j = {{"D", m.D}, {"tau", m.tau}, {"nonlinearity", m.g.label()}, {"lipschitz_bound", m.g.lipschitz_bound()},
              {"linearization_rate", m.linearization_rate()}, {"d", m.g.monotonicity_shift()}};
    return j;
}

inline void write_delta_csv(Context& ctx, double c, const LatticeModel& m) {
    auto f = ctx.open("delta.csv");
    f << "lambda,delta\n";
    for (const auto& [l, v] : delta_curve(c, m.D, m.linearization_rate(), ctx.cfg().dispersion.lambda_max,
                                          static_cast<int>(ctx.cfg().dispersion.samples)))
        f << num(l) << ',' << num(v) << '\n';
}

inline SimulationOptions sim_options(const RunConfig& cfg, double c_star) {
    SimulationOptions o;
    o.N = cfg.simulation.N;
    o.dt = cfg.simulation.dt;
    o.T = cfg.simulation.T;
    o.stride = cfg.simulation.stride;
    o.truncation_guard = cfg.simulation.truncation_guard;
    o.speed_bound = cfg.simulation.speed_bound_factor * c_star;
    return o;
}

inline double cstar_or_zero(const LatticeModel& m) {
    return m.linearization_rate() > 0 ? compute_cstar(m.D, m.linearization_rate()).c_star : 0.0;
}

inline json sim_resolved(const LatticeModel& m, const SimulationOptions& o, const Trajectory& t) {
    return {{"dt", t.dt},
            {"delay_steps", t.delay_steps},
            {"steps", t.times.empty() ? 0 : std::lround(t.times.back() / t.dt)},
            {"final_time", t.times.empty() ? 0.0 : t.times.back()},
            {"speed_bound", o.speed_bound},
            {"stable_step_limit", stable_step_limit(m)},
            {"guard_level", o.guard_level},
            {"guard_sites", o.guard_sites},
            {"bound_slack", bound_slack}};
}

inline json profile_json(const WaveProfile& p) {
    return {{"c", p.c},
            {"c_operator", p.c_operator},
            {"method", p.method},
            {"q", p.q},
            {"eta", p.eta},
            {"d", p.grid.d},
            {"beta", p.grid.beta},
            {"h", p.grid.h},
            {"K", p.grid.K},
            {"xi_min", p.grid.xi_min},
            {"xi_max", p.grid.xi_max},
            {"points", p.grid.size},
            {"iterations", p.iterations},
            {"polish_iterations", p.polish_iterations},
            {"gap", jnum(p.gap)},
            {"polish_change", jnum(p.polish_change)},
            {"residual_sup", jnum(p.residual_sup)},
            {"bracket_ok", p.bracket_ok},
            {"bracket_excess", jnum(p.bracket_excess)},
            {"lambda1", p.roots.lambda1},
            {"lambda2", p.roots.lambda2},
            {"double_root", p.roots.double_root},
            {"E", p.E},
            {"gauge_shift", p.gauge_shift},
            {"left_value", p.phi.front()},
            {"right_value", p.phi.back()},
            {"left_ok", p.left_ok},
            {"right_ok", p.right_ok},
            {"right_regime", p.right_regime},
            {"tail",
             {{"xi0", p.tail.xi0}, {"value", p.tail.value}, {"rate_a", p.tail.rate_a}, {"rate_b", p.tail.rate_b},
              {"weight", p.tail.weight}}}};
}

inline void write_plot(Context& ctx, const std::string& body) {
    if (!ctx.cfg().output.emit_plot) return;
    ctx.open("plot.py") << "#!/usr/bin/env python3\n"
                           "# Reads the CSV files next to this script and writes PNG figures.\n"
                           "import csv, os\n"
                           "import matplotlib\n"
                           "matplotlib.use('Agg')\n"
                           "import matplotlib.pyplot as plt\n\n"
                           "here = os.path.dirname(os.path.abspath(__file__))\n\n"
                           "def load(name):\n"
                           "    with open(os.path.join(here, name)) as f:\n"
                           "        rows = list(csv.DictReader(f))\n"
                           "    return {k: [r[k] for r in rows] for k in (rows[0].keys() if rows else [])}\n\n"
                           "def floats(xs):\n"
                           "    return [float(x) for x in xs]\n\n"
                        << body;
}

inline const char* delta_plot =
    "d = load('delta.csv')\n"
    "plt.plot(floats(d['lambda']), floats(d['delta']))\n"
    "plt.axhline(0.0, color='k', lw=0.5)\n"
    "plt.xlabel('lambda'); plt.ylabel('Delta(lambda, c)')\n"
    "plt.savefig(os.path.join(here, 'delta.png'), dpi=150)\n";

// ---- subcommands ----

inline void check_hypotheses_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    const auto g = build_nonlinearity(cfg.model.nonlinearity);
    const auto rep = check_hypotheses(g, static_cast<int>(cfg.hypotheses.grid_n), cfg.hypotheses.tol_root);
    json v = json::array();
    for (const auto& w : rep.violations)
        v.push_back({{"hypothesis", w.hypothesis}, {"u", w.u}, {"v", w.v}, {"value", jnum(w.value)}, {"detail", w.detail}});
    ctx.results() = {{"H1", rep.h1_ok}, {"H2", rep.h2_ok},         {"H3", rep.h3_ok},
                     {"H4", rep.h4_ok}, {"all_ok", rep.all_ok()}, {"E", rep.E ? json(*rep.E) : json(nullptr)},
                     {"violations", v}, {"note", rep.note}};
    ctx.resolved() = {{"grid_n", rep.grid_n}, {"tol_root", rep.tol_root}, {"lipschitz_bound", g.lipschitz_bound()},
                      {"d", g.monotonicity_shift()}};
    auto flag = [](bool b) { return b ? "ok" : "violated"; };
    ctx.out() << "H1 " << flag(rep.h1_ok) << "\nH2 " << flag(rep.h2_ok) << "\nH3 " << flag(rep.h3_ok) << "\nH4 "
              << flag(rep.h4_ok) << "\nE = " << (rep.E ? num(*rep.E) : std::string("none")) << '\n';
    for (const auto& w : rep.violations) ctx.out() << "  " << w.hypothesis << ": " << w.detail << '\n';
}

inline void speed_cmd(Context& ctx) {
    const auto m = build_model(ctx.cfg());
    const auto res = compute_cstar(m.D, m.linearization_rate());
    ctx.resolved() = model_summary(m);
    ctx.results() = {{"c_star", res.c_star}, {"lambda_star", res.lambda_star}};
    write_delta_csv(ctx, res.c_star, m);
    ctx.out() << "c_star = " << num(res.c_star) << "\nlambda_star = " << num(res.lambda_star) << '\n';
    write_plot(ctx, delta_plot);
}

inline void roots_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    if (!cfg.dispersion.c) throw ConfigError("dispersion.c", "required by roots (pass --c)");
    const auto m = build_model(cfg);
    const auto res = compute_cstar(m.D, m.linearization_rate());
    const double c = *cfg.dispersion.c;
    ctx.resolved() = model_summary(m);
    ctx.resolved()["c_star"] = res.c_star;
    ctx.resolved()["lambda_star"] = res.lambda_star;
    write_delta_csv(ctx, c, m);
    write_plot(ctx, delta_plot);
    const auto r = characteristic_roots(c, res);
    ctx.results() = {{"c", c}, {"lambda1", r.lambda1}, {"lambda2", r.lambda2}, {"double_root", r.double_root}};
    ctx.out() << "lambda1 = " << num(r.lambda1) << "\nlambda2 = " << num(r.lambda2) << '\n';
}

inline void simulate_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    const auto m = build_model(cfg);
    const auto o = sim_options(cfg, cstar_or_zero(m));
    const auto t = simulate(m, build_init(cfg.simulation.init), o);
    ctx.resolved() = sim_resolved(m, o, t);
    ctx.resolved()["model"] = model_summary(m);
    ctx.results() = {{"frames", t.frames()}, {"min_value", t.min_value}, {"max_value", t.max_value}};
    auto f = ctx.open("snapshots.csv");
    f << "t,n,u\n";
    for (std::size_t k = 0; k < t.frames(); ++k) {
        const std::string tk = num(t.times[k]);
        for (long n = -t.N; n <= t.N; ++n) f << tk << ',' << n << ',' << num(t.at(k, n)) << '\n';
    }
    ctx.out() << "frames = " << t.frames() << "\ndt = " << num(t.dt) << "\nmin = " << num(t.min_value)
              << "\nmax = " << num(t.max_value) << '\n';
    write_plot(ctx, "d = load('snapshots.csv')\n"
                    "t = floats(d['t']); n = floats(d['n']); u = floats(d['u'])\n"
                    "sc = plt.scatter(n, t, c=u, s=1, marker='s', cmap='viridis', vmin=0.0, vmax=1.0)\n"
                    "plt.colorbar(sc, label='u')\n"
                    "plt.xlabel('n'); plt.ylabel('t')\n"
                    "plt.savefig(os.path.join(here, 'snapshots.png'), dpi=150)\n");
}

struct FrontRun {
    double tau = 0.0;
    Trajectory traj;
    FrontTrace trace;
    SpeedEstimate est;
    SpeedEstimate left;
    ConeReport cone;
};

inline FrontRun front_run(const RunConfig& cfg, double tau, double c_star, double level, double E) {
    const auto m = build_model(cfg, tau);
    FrontRun r{tau, simulate(m, build_init(cfg.simulation.init), sim_options(cfg, c_star)), {}, {}, {}, {}};
    r.trace = track_front(r.traj, level);
    r.est = estimate_speed(r.trace, cfg.analysis.discard_fraction);
    FrontTrace mirrored = r.trace;
    for (auto& x : mirrored.left_positions) x = -x;
    mirrored.right_positions = mirrored.left_positions;
    r.left = estimate_speed(mirrored, cfg.analysis.discard_fraction);
    r.cone = cone_checks(r.traj, c_star, E, cfg.analysis.inner_factor, cfg.analysis.outer_factor);
    return r;
}

inline void front_speed_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    const auto base = build_model(cfg);
    const double rate = base.linearization_rate();
    const auto res = compute_cstar(base.D, rate);
    const double E = equilibrium(base.g);
    const double level = cfg.analysis.level.value_or(0.5 * E);
    const std::vector<double> taus = cfg.analysis.taus.empty() ? std::vector<double>{cfg.model.tau} : cfg.analysis.taus;

    std::vector<std::future<FrontRun>> jobs;
    for (double tau : taus)
        jobs.push_back(std::async(std::launch::async, front_run, std::cref(cfg), tau, res.c_star, level, E));
    std::vector<FrontRun> runs;
    for (auto& j : jobs) runs.push_back(j.get());

    ctx.resolved() = model_summary(base);
    ctx.resolved()["c_star"] = res.c_star;
    ctx.resolved()["lambda_star"] = res.lambda_star;
    ctx.resolved()["E"] = E;
    ctx.resolved()["level"] = level;
    ctx.resolved()["runs"] = json::array();

    json summary = {{"c_star", res.c_star}, {"E", E}, {"level", level}, {"runs", json::array()}};
    for (const auto& r : runs) {
        const std::string csv = runs.size() == 1 ? "speed.csv" : "speed_tau" + num(r.tau) + ".csv";
        auto f = ctx.open(csv);
        f << "t,position\n";
        for (std::size_t i = 0; i < r.trace.times.size(); ++i)
            f << num(r.trace.times[i]) << ',' << num(r.trace.right_positions[i]) << '\n';

        const double rel = std::abs(r.est.speed - res.c_star) / res.c_star;
        const json cone = {{"T", r.cone.T},
                           {"inner_radius", r.cone.inner_radius},
                           {"outer_radius", r.cone.outer_radius},
                           {"inner_deviation", r.cone.inner_deviation},
                           {"outer_max", r.cone.outer_max},
                           {"inner_target", r.cone.inner_target},
                           {"outer_target", r.cone.outer_target},
                           {"inner_ok", r.cone.inner_ok},
                           {"outer_ok", r.cone.outer_ok},
                           {"outer_vacuous", r.cone.outer_vacuous}};
        summary["runs"].push_back({{"tau", r.tau},
                                   {"csv", csv},
                                   {"speed", r.est.speed},
                                   {"intercept", r.est.intercept},
                                   {"r_squared", r.est.r_squared},
                                   {"fit_window", {r.est.t_lo, r.est.t_hi}},
                                   {"points", r.est.points},
                                   {"verdict", r.est.converged() ? "converged" : "transient"},
                                   {"left_speed", r.left.speed},
                                   {"relative_error", rel},
                                   {"cone", cone}});
        auto rs = sim_resolved(r.traj.model, sim_options(cfg, res.c_star), r.traj);
        rs["tau"] = r.tau;
        ctx.resolved()["runs"].push_back(rs);
        ctx.out() << "tau = " << num(r.tau) << ": speed = " << num(r.est.speed) << ", r^2 = " << num(r.est.r_squared)
                  << ", c* = " << num(res.c_star) << ", relative error = " << num(rel)
                  << ", inner cone " << (r.cone.inner_ok ? "ok" : "failed") << ", outer cone "
                  << (r.cone.outer_ok ? "ok" : "failed") << '\n';
    }
    ctx.results() = summary;
    ctx.write_json("summary.json", summary);
    write_plot(ctx, "import glob, json\n"
                    "s = json.load(open(os.path.join(here, 'summary.json')))\n"
                    "for run in s['runs']:\n"
                    "    d = load(run['csv'])\n"
                    "    t = floats(d['t']); x = floats(d['position'])\n"
                    "    plt.plot(t, x, label='tau = %g' % run['tau'])\n"
                    "    plt.plot(t, [run['intercept'] + run['speed'] * ti for ti in t], 'k--', lw=0.7)\n"
                    "plt.xlabel('t'); plt.ylabel('front position'); plt.legend()\n"
                    "plt.savefig(os.path.join(here, 'front.png'), dpi=150)\n");
}

inline void wave_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    const auto m = build_model(cfg);
    const auto res = compute_cstar(m.D, m.linearization_rate());
    const double c = cfg.wave.c.value_or(cfg.wave.c_factor * res.c_star);
    const auto o = build_wave_options(cfg);
    ctx.resolved() = model_summary(m);
    ctx.resolved()["c_star"] = res.c_star;
    ctx.resolved()["c"] = c;
    ctx.resolved()["anchor_factor"] = o.anchor_factor;
    ctx.resolved()["min_rate_ratio"] = o.min_rate_ratio;
    ctx.resolved()["polish_max_iter"] = o.polish_max_iter;
    ctx.resolved()["max_domain_doublings"] = o.max_domain_doublings;
    ctx.resolved()["bracket_slack"] = o.bracket_slack;
    ctx.resolved()["bracket_tol"] = o.bracket_tol;

    const auto p = solve_profile(c, m, o);
    ctx.results() = profile_json(p);
    if (p.method == "continuation")
        ctx.results()["note"] = "near-critical speed: profile continued from " + num(o.anchor_factor) +
                                " c* instead of the two-sided bracket";
    const auto R = residual_field(p, m);
    auto f = ctx.open("profile.csv");
    f << "xi,phi,residual\n";
    for (std::size_t i = 0; i < p.phi.size(); ++i) f << num(p.grid.point(i)) << ',' << num(p.phi[i]) << ',' << num(R[i]) << '\n';
    ctx.out() << "c = " << num(c) << " (" << p.method << ")\nq = " << num(p.q) << "\neta = " << num(p.eta)
              << "\nd = " << num(p.grid.d) << "\niterations = " << p.iterations << " + " << p.polish_iterations
              << "\nresidual_sup = " << num(p.residual_sup) << '\n';
    write_plot(ctx, "d = load('profile.csv')\n"
                    "fig, ax = plt.subplots(2, 1, sharex=True)\n"
                    "ax[0].plot(floats(d['xi']), floats(d['phi'])); ax[0].set_ylabel('phi')\n"
                    "ax[1].semilogy(floats(d['xi']), [abs(float(r)) for r in d['residual']]); ax[1].set_ylabel('|residual|')\n"
                    "ax[1].set_xlabel('xi')\n"
                    "fig.savefig(os.path.join(here, 'profile.png'), dpi=150)\n");
}

inline std::vector<double> scan_speeds(const RunConfig& cfg, double c_star) {
    std::vector<double> cs;
    if (cfg.wave.cmin) {
        const long n = cfg.wave.steps;
        for (long i = 0; i < n; ++i)
            cs.push_back(n == 1 ? *cfg.wave.cmin : *cfg.wave.cmin + (*cfg.wave.cmax - *cfg.wave.cmin) * double(i) / double(n - 1));
    } else {
        for (double f : cfg.wave.factors) cs.push_back(f * c_star);
    }
    return cs;
}

inline void wave_scan_cmd(Context& ctx) {
    const auto& cfg = ctx.cfg();
    const auto m = build_model(cfg);
    const auto res = compute_cstar(m.D, m.linearization_rate());
    const auto speeds = scan_speeds(cfg, res.c_star);
    ctx.resolved() = model_summary(m);
    ctx.resolved()["c_star"] = res.c_star;
    ctx.resolved()["speeds"] = speeds;
    const auto rows = scan_wavespeeds(m, speeds, build_wave_options(cfg));
    auto f = ctx.open("scan.csv");
    f << "c,c_over_cstar,status,method,residual,left_value,right_value,lambda1,iterations\n";
    json jr = json::array();
    for (const auto& r : rows) {
        f << num(r.c) << ',' << num(r.ratio) << ',' << r.status << ',' << r.method << ',' << num(r.residual) << ','
          << num(r.left_value) << ',' << num(r.right_value) << ',' << num(r.lambda1) << ',' << r.iterations << '\n';
        jr.push_back({{"c", r.c}, {"status", r.status}, {"method", r.method}, {"residual", jnum(r.residual)},
                      {"message", r.message}});
        ctx.out() << num(r.ratio) << " c*: " << r.status << (r.method.empty() ? "" : " (" + r.method + ")") << '\n';
    }
    ctx.results() = {{"rows", jr}};
    write_plot(ctx, "d = load('scan.csv')\n"
                    "ok = [s == 'converged' for s in d['status']]\n"
                    "r = floats(d['c_over_cstar'])\n"
                    "plt.scatter(r, [1 if k else 0 for k in ok])\n"
                    "plt.axvline(1.0, color='k', lw=0.5)\n"
                    "plt.yticks([0, 1], ['no wave', 'wave']); plt.xlabel('c / c*')\n"
                    "plt.savefig(os.path.join(here, 'scan.png'), dpi=150)\n");
}

} // namespace detail

inline int exit_code(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->kind() == ErrorKind::invalid_input ? 2 : 3;
    return 1;
}

inline json error_record(const std::string& sub, const std::exception& e) {
    json j = {{"status", "error"}, {"subcommand", sub}, {"exit_code", exit_code(e)}, {"message", e.what()}};
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        j["kind"] = err->kind() == ErrorKind::invalid_input ? "invalid_input" : "numerical";
        j["code"] = err->code();
        if (const auto* nf = dynamic_cast<const NumericalFailure*>(&e)) j["value"] = jnum(nf->value());
        if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["field"] = ce->field();
    } else {
        j["kind"] = "internal";
        j["code"] = "unexpected";
    }
    return j;
}

// Writes the error record to stderr and, when possible, to <dir>/error.json.
inline void report_error(const std::string& sub, const std::exception& e, const std::string& dir, std::ostream& err) {
    const json rec = error_record(sub, e);
    err << rec.dump() << '\n';
    if (dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream f(std::filesystem::path(dir) / "error.json");
    if (f) f << rec.dump(2) << '\n';
}

inline int run(const std::string& sub, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, std::function<void(Context&)>> table{
        {"check-hypotheses", detail::check_hypotheses_cmd},
        {"speed", detail::speed_cmd},
        {"roots", detail::roots_cmd},
        {"simulate", detail::simulate_cmd},
        {"front-speed", detail::front_speed_cmd},
        {"wave", detail::wave_cmd},
        {"wave-scan", detail::wave_scan_cmd}};
    try {
        const auto it = table.find(sub);
        if (it == table.end()) throw ConfigError("subcommand", "unknown subcommand '" + sub + "'");
        Context ctx(sub, cfg, out);
        it->second(ctx);
        ctx.finish();
        return 0;
    } catch (const std::exception& e) {
        report_error(sub, e, cfg.output.dir, err);
        return exit_code(e);
    }
}

} // namespace dlat::app
