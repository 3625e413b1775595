#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dlat/app.hpp"
#include "tight_approx.hpp"

using dlat::RunConfig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dlat_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Proc {
    int status;
    std::string out, err;
};

Proc cli(const std::string& args, const fs::path& dir) {
    const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string(DLAT_CLI_PATH) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(o), slurp(e)};
}

RunConfig small(const fs::path& dir, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> o{"simulation.N=80", "simulation.T=20", "simulation.stride=5",
                               "output.dir=\"" + dir.string() + "\""};
    o.insert(o.end(), extra.begin(), extra.end());
    return dlat::load_config("", o);
}

std::string config_file(const std::string& name) { return std::string(DLAT_CONFIG_DIR) + "/" + name; }

} // namespace

TEST_CASE("empty config yields the documented defaults", "[cli]") {
    const auto c = dlat::load_config("");
    CHECK(c.model.D == 1.0);
    CHECK(c.model.tau == 1.0);
    CHECK(c.model.nonlinearity.kind == "logistic");
    CHECK(c.simulation.N == 600);
    CHECK(c.simulation.dt == 0.02);
    CHECK(c.simulation.T == 200.0);
    CHECK(c.wave.h == 0.01);
    CHECK(c.wave.tol == 1e-10);
    CHECK(c.output.dir == "out");
}

TEST_CASE("invalid configs name the failing field", "[cli]") {
    const std::vector<std::pair<std::string, std::string>> cases{
        {"model: {D: 0}", "model.D"},
        {"model: {tau: -1}", "model.tau"},
        {"model: {nonlinearity: {r: -2}}", "model.nonlinearity.r"},
        {"model: {nonlinearity: {kind: cubic}}", "model.nonlinearity.kind"},
        {"model: {nonlinearity: {kind: table, u: [0, 1], v: [0, 1], values: [[1, 0]]}}", "model.nonlinearity.values"},
        {"simulation: {N: 0}", "simulation.N"},
        {"simulation: {dt: 0}", "simulation.dt"},
        {"simulation: {stride: 0}", "simulation.stride"},
        {"simulation: {init: {kind: profile, values: [0.1, 0.2]}}", "simulation.init.values"},
        {"simulation: {init: {height: 1.5}}", "simulation.init.height"},
        {"analysis: {level: 1.0}", "analysis.level"},
        {"analysis: {discard_fraction: 1}", "analysis.discard_fraction"},
        {"analysis: {outer_factor: 0.9}", "analysis.outer_factor"},
        {"wave: {h: 0}", "wave.h"},
        {"wave: {cmin: 1}", "wave.cmin"},
        {"wave: {cmin: 2, cmax: 1}", "wave.cmax"},
        {"wave: {xi_max: 10}", "wave.xi_max"},
        {"hypotheses: {grid_n: 4}", "hypotheses.grid_n"},
        {"model: {D: abc}", "model.D"},
        {"simulation: {N: 1.5}", "simulation.N"},
        {"model: {diffusion: 1}", "model.diffusion"},
        {"wave: {nonsense: 1}", "wave.nonsense"},
        {"extras: 1", "extras"},
        {"model: [1, 2]", "model"},
        {"model: {D: [", "<file>"},
    };
    for (const auto& [text, field] : cases) {
        INFO(text);
        try {
            dlat::load_config(text);
            FAIL("accepted an invalid config");
        } catch (const dlat::ConfigError& e) {
            CHECK(e.field() == field);
            CHECK(e.kind() == dlat::ErrorKind::invalid_input);
        }
    }
}

TEST_CASE("overrides replace config values and create missing blocks", "[cli]") {
    const auto c = dlat::load_config("model: {D: 2}", {"model.D=0.5", "wave.factors=[1, 2]", "analysis.level=0.25"});
    CHECK(c.model.D == 0.5);
    CHECK(c.wave.factors == std::vector<double>{1, 2});
    REQUIRE(c.analysis.level);
    CHECK(*c.analysis.level == 0.25);
    CHECK_THROWS_AS(dlat::load_config("", {"model.D"}), dlat::ConfigError);
}

TEST_CASE("the manifest echo of a config parses back to the same config", "[cli]") {
    for (const auto* name : {"benchmark.yaml", "delay_sweep.yaml", "table.yaml", "scan.yaml"}) {
        INFO(name);
        const auto c = dlat::load_config(slurp(config_file(name)));
        const json echo = dlat::to_json(c);
        const auto back = dlat::load_config(echo.dump());
        CHECK(dlat::to_json(back) == echo);
    }
}

TEST_CASE("manifest records every resolved parameter", "[cli]") {
    struct Case {
        std::string sub;
        std::vector<std::string> extra;
        std::vector<std::string> resolved;
        std::vector<std::string> results;
        std::vector<std::string> files;
    };
    const std::vector<Case> cases{
        {"check-hypotheses", {}, {"grid_n", "tol_root", "lipschitz_bound", "d"}, {"H1", "H2", "H3", "H4", "E", "violations"}, {}},
        {"speed", {}, {"D", "tau", "linearization_rate", "lipschitz_bound", "d"}, {"c_star", "lambda_star"}, {"delta.csv"}},
        {"roots", {"dispersion.c=3"}, {"c_star", "lambda_star", "linearization_rate"}, {"c", "lambda1", "lambda2"}, {"delta.csv"}},
        {"simulate",
         {"model.tau=0.3"},
         {"dt", "delay_steps", "steps", "final_time", "speed_bound", "stable_step_limit", "guard_level", "guard_sites", "model"},
         {"frames", "min_value", "max_value"},
         {"snapshots.csv"}},
        {"front-speed", {"simulation.T=40", "simulation.N=150"}, {"c_star", "E", "level", "runs"}, {"runs", "c_star"}, {"speed.csv", "summary.json"}},
        {"wave",
         {},
         {"c_star", "c", "anchor_factor", "min_rate_ratio", "polish_max_iter", "bracket_tol", "d"},
         {"c", "q", "eta", "d", "iterations", "polish_iterations", "residual_sup", "h", "K", "xi_min", "xi_max", "method",
          "gauge_shift", "lambda1", "lambda2"},
         {"profile.csv"}},
        {"wave-scan", {"wave.factors=[0.5, 1.5]"}, {"c_star", "speeds"}, {"rows"}, {"scan.csv"}},
    };
    for (const auto& k : cases) {
        INFO(k.sub);
        const auto dir = scratch("manifest_" + k.sub);
        const auto cfg = small(dir, k.extra);
        std::ostringstream out, err;
        REQUIRE(dlat::app::run(k.sub, cfg, out, err) == 0);
        const json m = read_json(dir / "manifest.json");
        CHECK(m["subcommand"] == k.sub);
        CHECK(m["status"] == "ok");
        CHECK(m["config"] == dlat::to_json(cfg));
        for (const auto& key : k.resolved) {
            INFO(key);
            CHECK(m["resolved"].contains(key));
        }
        for (const auto& key : k.results) {
            INFO(key);
            CHECK(m["results"].contains(key));
        }
        for (const auto& f : k.files) {
            INFO(f);
            CHECK(fs::exists(dir / f));
            CHECK(std::find(m["outputs"].begin(), m["outputs"].end(), f) != m["outputs"].end());
        }
        CHECK_FALSE(fs::exists(dir / "plot.py"));
    }
}

TEST_CASE("simulate manifest reports the snapped step", "[cli]") {
    const auto dir = scratch("snap");
    const auto cfg = small(dir, {"model.tau=0.05", "simulation.dt=0.015"});
    std::ostringstream out, err;
    REQUIRE(dlat::app::run("simulate", cfg, out, err) == 0);
    const json m = read_json(dir / "manifest.json");
    CHECK(m["resolved"]["delay_steps"] == 4);
    CHECK(m["resolved"]["dt"].get<double>() == Approx(0.0125).epsilon(1e-14));
}

TEST_CASE("identical configs give bitwise identical CSVs", "[cli]") {
    const auto a = scratch("repro_a"), b = scratch("repro_b");
    for (const auto& sub : {"simulate", "wave", "speed"}) {
        INFO(sub);
        std::ostringstream out, err;
        REQUIRE(dlat::app::run(sub, small(a / sub, {"model.tau=0.7"}), out, err) == 0);
        REQUIRE(dlat::app::run(sub, small(b / sub, {"model.tau=0.7"}), out, err) == 0);
    }
    for (const auto& f : {"simulate/snapshots.csv", "wave/profile.csv", "speed/delta.csv"}) {
        INFO(f);
        const auto x = slurp(a / f);
        CHECK(!x.empty());
        CHECK(x == slurp(b / f));
    }
}

TEST_CASE("CSV headers match the documented columns", "[cli]") {
    const auto dir = scratch("headers");
    std::ostringstream out, err;
    REQUIRE(dlat::app::run("simulate", small(dir / "s"), out, err) == 0);
    REQUIRE(dlat::app::run("front-speed", small(dir / "f", {"simulation.T=40", "simulation.N=150"}), out, err) == 0);
    REQUIRE(dlat::app::run("wave", small(dir / "w"), out, err) == 0);
    REQUIRE(dlat::app::run("roots", small(dir / "r", {"dispersion.c=3"}), out, err) == 0);
    auto header = [](const fs::path& p) {
        std::ifstream f(p);
        std::string h;
        std::getline(f, h);
        return h;
    };
    CHECK(header(dir / "s/snapshots.csv") == "t,n,u");
    CHECK(header(dir / "f/speed.csv") == "t,position");
    CHECK(header(dir / "w/profile.csv") == "xi,phi,residual");
    CHECK(header(dir / "r/delta.csv") == "lambda,delta");
}

TEST_CASE("roots output satisfies the characteristic equation", "[cli]") {
    const auto dir = scratch("roots");
    std::ostringstream out, err;
    REQUIRE(dlat::app::run("roots", small(dir, {"dispersion.c=2.6", "model.D=0.7", "model.nonlinearity.r=1.3"}), out, err) == 0);
    const json r = read_json(dir / "manifest.json")["results"];
    for (const char* k : {"lambda1", "lambda2"}) {
        const double l = r[k];
        CHECK(std::abs(2.6 * l - 0.7 * (std::exp(l) + std::exp(-l) - 2.0) - 1.3) < 1e-9);
    }
    CHECK(r["lambda1"].get<double>() < r["lambda2"].get<double>());
}

TEST_CASE("check-hypotheses on the logistic benchmark", "[cli]") {
    const auto dir = scratch("hyp");
    std::ostringstream out, err;
    REQUIRE(dlat::app::run("check-hypotheses", small(dir), out, err) == 0);
    const json r = read_json(dir / "manifest.json")["results"];
    for (const char* k : {"H1", "H2", "H3", "H4", "all_ok"}) CHECK(r[k] == true);
    CHECK(r["E"].get<double>() == Approx(2.0 / 3.0).margin(1e-10));
    CHECK(r["violations"].empty());
}

TEST_CASE("speed subcommand prints c* and lambda*", "[cli]") {
    const auto dir = scratch("speed");
    const auto p = cli("speed --out " + dir.string(), dir);
    REQUIRE(p.status == 0);
    std::istringstream in(p.out);
    std::string name, eq;
    double cs = 0, ls = 0;
    in >> name >> eq >> cs;
    CHECK(name == "c_star");
    in >> name >> eq >> ls;
    CHECK(name == "lambda_star");
    CHECK(cs == Approx(2.0735).margin(1e-4));
    // stationarity: c = (2 cosh l - 2 + 1) / l and c = 2 sinh l at the minimiser
    CHECK(std::abs(cs - 2.0 * std::sinh(ls)) < 1e-7);
    CHECK(std::abs(cs * ls - (2.0 * std::cosh(ls) - 1.0)) < 1e-7);
}

TEST_CASE("front-speed on the benchmark lands within 5 percent of c*", "[cli]") {
    const auto dir = scratch("front");
    const auto p = cli("front-speed --config " + config_file("benchmark.yaml") + " --out " + dir.string() + " --emit-plot", dir);
    REQUIRE(p.status == 0);
    const json s = read_json(dir / "summary.json");
    REQUIRE(s["runs"].size() == 1);
    const auto& run = s["runs"][0];
    CHECK(run["r_squared"].get<double>() >= 0.99);
    CHECK(run["relative_error"].get<double>() <= 0.05);
    CHECK(run["cone"]["inner_ok"] == true);
    CHECK(run["cone"]["outer_ok"] == true);
    CHECK(std::abs(run["speed"].get<double>() - s["c_star"].get<double>()) <= 0.05 * s["c_star"].get<double>());
    const auto script = slurp(dir / "plot.py");
    CHECK(script.find("summary.json") != std::string::npos);
    CHECK(script.find("savefig") != std::string::npos);
}

TEST_CASE("multi-delay front-speed writes one trace per delay", "[cli]") {
    const auto dir = scratch("taus");
    std::ostringstream out, err;
    REQUIRE(dlat::app::run("front-speed", small(dir, {"analysis.taus=[0, 2]", "simulation.T=40", "simulation.N=150"}), out, err) == 0);
    CHECK(fs::exists(dir / "speed_tau0.csv"));
    CHECK(fs::exists(dir / "speed_tau2.csv"));
    const json s = read_json(dir / "summary.json");
    REQUIRE(s["runs"].size() == 2);
    CHECK(s["runs"][0]["tau"] == 0.0);
    CHECK(s["runs"][1]["tau"] == 2.0);
}

TEST_CASE("wave-scan flags give an evenly spaced table", "[cli]") {
    const auto dir = scratch("scan");
    const auto p = cli("wave-scan --cmin 1 --cmax 1.8 --steps 3 --out " + dir.string(), dir);
    REQUIRE(p.status == 0);
    std::ifstream f(dir / "scan.csv");
    std::string line;
    std::getline(f, line);
    std::vector<std::string> rows;
    while (std::getline(f, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].rfind("1,", 0) == 0);
    CHECK(rows[1].rfind("1.3999999999999999,", 0) == 0);
    CHECK(rows[2].rfind("1.8,", 0) == 0);
    for (const auto& r : rows) CHECK(r.find("no admissible decay rate") != std::string::npos);
}

TEST_CASE("exit codes and error records", "[cli]") {
    const auto dir = scratch("exit");
    SECTION("success") { CHECK(cli("check-hypotheses --out " + (dir / "ok").string(), dir).status == 0); }
    SECTION("invalid field") {
        const auto p = cli("simulate --set simulation.dt=-1 --out " + (dir / "bad").string(), dir);
        CHECK(p.status == 2);
        const json e = read_json(dir / "bad/error.json");
        CHECK(e["field"] == "simulation.dt");
        CHECK(e["kind"] == "invalid_input");
        CHECK(json::parse(p.err) == e);
    }
    SECTION("unknown flag") { CHECK(cli("speed --bogus", dir).status == 2); }
    SECTION("missing subcommand") { CHECK(cli("", dir).status == 2); }
    SECTION("missing config file") { CHECK(cli("speed --config /nonexistent/x.yaml", dir).status == 2); }
    SECTION("roots below c*") {
        const auto p = cli("roots --c 1.5 --out " + (dir / "roots").string(), dir);
        CHECK(p.status == 3);
        const json e = read_json(dir / "roots/error.json");
        CHECK(e["code"] == "no_real_roots");
        CHECK(e["kind"] == "numerical");
        CHECK(e["message"] == "no real roots below critical speed");
    }
    SECTION("front reaches the boundary") {
        const auto p = cli("simulate --N 20 --T 40 --set simulation.speed_bound_factor=0 --out " + (dir / "guard").string(), dir);
        CHECK(p.status == 3);
        CHECK(read_json(dir / "guard/error.json")["code"] == "truncation_too_small");
    }
    SECTION("lattice too small for the speed bound") {
        const auto p = cli("simulate --N 20 --T 40 --out " + (dir / "bound").string(), dir);
        CHECK(p.status == 2);
        CHECK(read_json(dir / "bound/error.json")["code"] == "truncation_too_small");
    }
    SECTION("wave below c*") {
        const auto p = cli("wave --c 1.0 --out " + (dir / "slow").string(), dir);
        CHECK(p.status == 3);
        CHECK(read_json(dir / "slow/error.json")["code"] == "no_real_roots");
    }
    SECTION("roots without a speed") {
        std::ostringstream out, err;
        CHECK(dlat::app::run("roots", small(dir / "nospeed"), out, err) == 2);
        CHECK(read_json(dir / "nospeed/error.json")["field"] == "dispersion.c");
    }
    SECTION("a later success clears the error record") {
        std::ostringstream out, err;
        CHECK(dlat::app::run("roots", small(dir / "again"), out, err) == 2);
        CHECK(fs::exists(dir / "again/error.json"));
        CHECK(dlat::app::run("roots", small(dir / "again", {"dispersion.c=3"}), out, err) == 0);
        CHECK_FALSE(fs::exists(dir / "again/error.json"));
    }
}
