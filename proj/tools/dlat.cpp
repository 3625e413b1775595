// dlat: command-line front end for the delayed lattice toolkit.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlat/app.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw dlat::ConfigError("config", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Flags {
    std::string config;
    std::string out;
    std::vector<std::string> set;
    bool emit_plot = false;
    std::optional<double> D, tau, r, a, dt, T, h, c, cmin, cmax;
    std::optional<long> N, steps;
};

std::vector<std::string> overrides(const Flags& f, const std::string& sub) {
    std::vector<std::string> o;
    auto put = [&](const char* key, const auto& v) {
        if (!v) return;
        std::ostringstream s;
        s.precision(17);
        s << key << '=' << *v;
        o.push_back(s.str());
    };
    put("model.D", f.D);
    put("model.tau", f.tau);
    put("model.nonlinearity.r", f.r);
    put("model.nonlinearity.a", f.a);
    put("simulation.N", f.N);
    put("simulation.dt", f.dt);
    put("simulation.T", f.T);
    put("wave.h", f.h);
    put(sub == "roots" ? "dispersion.c" : "wave.c", f.c);
    put("wave.cmin", f.cmin);
    put("wave.cmax", f.cmax);
    put("wave.steps", f.steps);
    if (!f.out.empty()) o.push_back("output.dir=\"" + f.out + "\"");
    if (f.emit_plot) o.push_back("output.emit_plot=true");
    o.insert(o.end(), f.set.begin(), f.set.end());  // --set wins over the named flags
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spreading speeds and travelling waves for delayed lattice equations"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", dlat::app::version);

    Flags f;
    app.add_option("--config", f.config, "YAML run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", f.out, "output directory (output.dir)");
    app.add_option("--set", f.set, "override any config field, e.g. --set simulation.T=50")->take_all();
    app.add_flag("--emit-plot", f.emit_plot, "write plot.py next to the CSV files");
    app.add_option("--D", f.D, "diffusion coefficient");
    app.add_option("--tau", f.tau, "delay");
    app.add_option("--r", f.r, "logistic growth rate");
    app.add_option("--a", f.a, "logistic competition coefficient");
    app.add_option("--N", f.N, "lattice half-width");
    app.add_option("--dt", f.dt, "time step (snapped to divide tau)");
    app.add_option("--T", f.T, "final time");

    app.add_subcommand("check-hypotheses", "screen the nonlinearity against H1-H4");
    app.add_subcommand("speed", "spreading speed c* and lambda*");
    app.add_subcommand("roots", "characteristic roots at speed c")->add_option("--c", f.c, "wave speed")->required();
    app.add_subcommand("simulate", "integrate the delayed lattice and write snapshots");
    app.add_subcommand("front-speed", "simulate, track the front and fit its speed");
    auto* wave = app.add_subcommand("wave", "travelling-wave profile at speed c");
    wave->add_option("--c", f.c, "wave speed (default: wave.c_factor * c*)");
    wave->add_option("--grid-h", f.h, "wave grid spacing (wave.h)");
    auto* scan = app.add_subcommand("wave-scan", "existence table over a range of speeds");
    scan->add_option("--cmin", f.cmin, "smallest speed");
    scan->add_option("--cmax", f.cmax, "largest speed");
    scan->add_option("--steps", f.steps, "number of speeds");
    scan->add_option("--grid-h", f.h, "wave grid spacing (wave.h)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        const dlat::ConfigError err("arguments", e.what());
        dlat::app::report_error("", err, f.out, std::cerr);
        return 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    dlat::RunConfig cfg;
    try {
        cfg = dlat::load_config(f.config.empty() ? std::string() : read_file(f.config), overrides(f, sub));
    } catch (const std::exception& e) {
        dlat::app::report_error(sub, e, f.out, std::cerr);
        return dlat::app::exit_code(e);
    }
    return dlat::app::run(sub, cfg, std::cout, std::cerr);
}
