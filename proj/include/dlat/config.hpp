#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <nlohmann/json.hpp>

#include "dlat/error.hpp"
#include "dlat/model.hpp"
#include "dlat/simulator.hpp"
#include "dlat/waves.hpp"

namespace dlat {

// Configuration problems; `field` names the offending key path.
class ConfigError : public InvalidInput {
public:
    ConfigError(std::string field, const std::string& message)
        : InvalidInput("invalid_config", field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct NonlinearitySpec {
    std::string kind = "logistic";
    double r = 1.0;
    double a = 0.5;
    std::vector<double> u, v;
    std::vector<std::vector<double>> values;  // values[i][j] = g(u[i], v[j])
};

struct InitSpec {
    std::string kind = "bump";  // bump | profile
    long radius = 2;
    double height = 0.5;
    std::vector<double> values;  // profile: densities at n = -M..M
};

struct RunConfig {
    struct {
        double D = 1.0;
        double tau = 1.0;
        NonlinearitySpec nonlinearity;
    } model;
    struct {
        long N = 600;
        double dt = 0.02;
        double T = 200.0;
        long stride = 10;
        double speed_bound_factor = 1.25;
        bool truncation_guard = true;
        InitSpec init;
    } simulation;
    struct {
        std::optional<double> level;  // default E/2
        double discard_fraction = 0.5;
        double inner_factor = 0.5;
        double outer_factor = 1.2;
        std::vector<double> taus;     // non-empty: one front-speed run per delay
    } analysis;
    struct {
        std::optional<double> c;      // absolute speed; otherwise c_factor * c*
        double c_factor = 1.2;
        std::optional<double> cmin, cmax;
        long steps = 5;
        std::vector<double> factors{0.5, 0.9, 1.0, 1.1, 1.5};
        double h = 0.01;
        double xi_max = 40.0;
        double tol = 1e-10;
        long max_iter = 20000;
        double polish_tol = 1e-12;
        double max_depth = 2000.0;
    } wave;
    struct {
        std::optional<double> c;      // roots: speed; delta curve at c* when absent
        double lambda_max = 5.0;
        long samples = 500;
    } dispersion;
    struct {
        long grid_n = 64;
        double tol_root = 1e-10;
    } hypotheses;
    struct {
        std::string dir = "out";
        bool emit_plot = false;
    } output;
};

namespace detail {

class Reader {
public:
    explicit Reader(std::string prefix) : prefix_(std::move(prefix)) {}

    template <class T>
    void get(const YAML::Node& node, const char* key, T& out) {
        seen_.insert(key);
        const YAML::Node v = node[key];
        if (!v || v.IsNull()) return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path(key), "has the wrong type");
        }
    }

    template <class T>
    void get(const YAML::Node& node, const char* key, std::optional<T>& out) {
        seen_.insert(key);
        const YAML::Node v = node[key];
        if (!v || v.IsNull()) return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path(key), "has the wrong type");
        }
    }

    void allow(const char* key) { seen_.insert(key); }

    void reject_unknown(const YAML::Node& node) const {
        if (!node || node.IsNull()) return;
        if (!node.IsMap()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "must be a mapping");
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError(path(key.c_str()), "unknown key");
        }
    }

    std::string path(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    std::string prefix_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

inline bool finite(double x) { return std::isfinite(x); }

} // namespace detail

inline void validate(const RunConfig& c) {
    using detail::finite;
    using detail::require;
    require(finite(c.model.D) && c.model.D > 0, "model.D", "must be > 0");
    require(finite(c.model.tau) && c.model.tau >= 0, "model.tau", "must be >= 0");
    const auto& g = c.model.nonlinearity;
    if (g.kind == "logistic") {
        require(finite(g.r) && g.r > 0, "model.nonlinearity.r", "must be > 0");
        require(finite(g.a), "model.nonlinearity.a", "must be finite");
    } else if (g.kind == "table") {
        require(g.u.size() >= 2, "model.nonlinearity.u", "needs at least 2 nodes");
        require(g.v.size() >= 2, "model.nonlinearity.v", "needs at least 2 nodes");
        require(g.values.size() == g.u.size(), "model.nonlinearity.values", "needs one row per u node");
        for (const auto& row : g.values)
            require(row.size() == g.v.size(), "model.nonlinearity.values", "rows need one entry per v node");
    } else {
        throw ConfigError("model.nonlinearity.kind", "must be 'logistic' or 'table'");
    }

    const auto& s = c.simulation;
    require(s.N >= 1, "simulation.N", "must be >= 1");
    require(finite(s.dt) && s.dt > 0, "simulation.dt", "must be > 0");
    require(finite(s.T) && s.T > 0, "simulation.T", "must be > 0");
    require(s.stride >= 1, "simulation.stride", "must be >= 1");
    require(finite(s.speed_bound_factor) && s.speed_bound_factor >= 0, "simulation.speed_bound_factor", "must be >= 0");
    if (s.init.kind == "bump") {
        require(s.init.radius >= 0 && s.init.radius < s.N, "simulation.init.radius", "must lie in [0, N)");
        require(s.init.height > 0 && s.init.height <= 1, "simulation.init.height", "must lie in (0, 1]");
    } else if (s.init.kind == "profile") {
        require(!s.init.values.empty() && s.init.values.size() % 2 == 1, "simulation.init.values",
                "needs an odd number of entries centred on n = 0");
        require(long(s.init.values.size() / 2) < s.N, "simulation.init.values", "support must fit inside the lattice");
        for (double x : s.init.values) require(x >= 0 && x <= 1, "simulation.init.values", "entries must lie in [0,1]");
    } else {
        throw ConfigError("simulation.init.kind", "must be 'bump' or 'profile'");
    }

    const auto& a = c.analysis;
    if (a.level) require(*a.level > 0 && *a.level < 1, "analysis.level", "must lie in (0,1)");
    require(a.discard_fraction >= 0 && a.discard_fraction < 1, "analysis.discard_fraction", "must lie in [0,1)");
    require(a.inner_factor > 0 && a.inner_factor < 1, "analysis.inner_factor", "must lie in (0,1)");
    require(a.outer_factor > 1, "analysis.outer_factor", "must be > 1");
    for (double t : a.taus) require(finite(t) && t >= 0, "analysis.taus", "entries must be >= 0");

    const auto& w = c.wave;
    if (w.c) require(finite(*w.c) && *w.c > 0, "wave.c", "must be > 0");
    require(finite(w.c_factor) && w.c_factor > 0, "wave.c_factor", "must be > 0");
    if (w.cmin) require(*w.cmin > 0, "wave.cmin", "must be > 0");
    if (w.cmax) require(*w.cmax > 0, "wave.cmax", "must be > 0");
    require(bool(w.cmin) == bool(w.cmax), "wave.cmin", "cmin and cmax must be given together");
    if (w.cmin) require(*w.cmax >= *w.cmin, "wave.cmax", "must be >= cmin");
    require(w.steps >= 1, "wave.steps", "must be >= 1");
    for (double f : w.factors) require(finite(f) && f > 0, "wave.factors", "entries must be > 0");
    require(finite(w.h) && w.h > 0 && w.h <= 0.1, "wave.h", "must lie in (0, 0.1]");
    require(finite(w.xi_max) && w.xi_max >= 40, "wave.xi_max", "must be >= 40");
    require(finite(w.tol) && w.tol > 0, "wave.tol", "must be > 0");
    require(w.max_iter >= 1, "wave.max_iter", "must be >= 1");
    require(finite(w.polish_tol) && w.polish_tol > 0, "wave.polish_tol", "must be > 0");
    require(finite(w.max_depth) && w.max_depth >= 40, "wave.max_depth", "must be >= 40");

    const auto& d = c.dispersion;
    if (d.c) require(finite(*d.c) && *d.c > 0, "dispersion.c", "must be > 0");
    require(finite(d.lambda_max) && d.lambda_max > 0, "dispersion.lambda_max", "must be > 0");
    require(d.samples >= 2, "dispersion.samples", "must be >= 2");
    require(c.hypotheses.grid_n >= 16, "hypotheses.grid_n", "must be >= 16");
    require(c.hypotheses.tol_root > 0, "hypotheses.tol_root", "must be > 0");
    require(!c.output.dir.empty(), "output.dir", "must not be empty");
}

inline RunConfig parse_config(const YAML::Node& root) {
    RunConfig c;
    if (!root || root.IsNull()) return c;
    detail::Reader top("");
    for (const char* k : {"model", "simulation", "analysis", "wave", "dispersion", "hypotheses", "output"})
        top.allow(k);
    top.reject_unknown(root);

    if (const auto n = root["model"]) {
        detail::Reader r("model");
        r.get(n, "D", c.model.D);
        r.get(n, "tau", c.model.tau);
        YAML::Node g;
        r.get(n, "nonlinearity", g);
        r.reject_unknown(n);
        if (g) {
            detail::Reader q("model.nonlinearity");
            auto& s = c.model.nonlinearity;
            q.get(g, "kind", s.kind);
            q.get(g, "r", s.r);
            q.get(g, "a", s.a);
            q.get(g, "u", s.u);
            q.get(g, "v", s.v);
            q.get(g, "values", s.values);
            q.reject_unknown(g);
        }
    }
    if (const auto n = root["simulation"]) {
        detail::Reader r("simulation");
        auto& s = c.simulation;
        r.get(n, "N", s.N);
        r.get(n, "dt", s.dt);
        r.get(n, "T", s.T);
        r.get(n, "stride", s.stride);
        r.get(n, "speed_bound_factor", s.speed_bound_factor);
        r.get(n, "truncation_guard", s.truncation_guard);
        YAML::Node init;
        r.get(n, "init", init);
        r.reject_unknown(n);
        if (init) {
            detail::Reader q("simulation.init");
            q.get(init, "kind", s.init.kind);
            q.get(init, "radius", s.init.radius);
            q.get(init, "height", s.init.height);
            q.get(init, "values", s.init.values);
            q.reject_unknown(init);
        }
    }
    if (const auto n = root["analysis"]) {
        detail::Reader r("analysis");
        auto& a = c.analysis;
        r.get(n, "level", a.level);
        r.get(n, "discard_fraction", a.discard_fraction);
        r.get(n, "inner_factor", a.inner_factor);
        r.get(n, "outer_factor", a.outer_factor);
        r.get(n, "taus", a.taus);
        r.reject_unknown(n);
    }
    if (const auto n = root["wave"]) {
        detail::Reader r("wave");
        auto& w = c.wave;
        r.get(n, "c", w.c);
        r.get(n, "c_factor", w.c_factor);
        r.get(n, "cmin", w.cmin);
        r.get(n, "cmax", w.cmax);
        r.get(n, "steps", w.steps);
        r.get(n, "factors", w.factors);
        r.get(n, "h", w.h);
        r.get(n, "xi_max", w.xi_max);
        r.get(n, "tol", w.tol);
        r.get(n, "max_iter", w.max_iter);
        r.get(n, "polish_tol", w.polish_tol);
        r.get(n, "max_depth", w.max_depth);
        r.reject_unknown(n);
    }
    if (const auto n = root["dispersion"]) {
        detail::Reader r("dispersion");
        r.get(n, "c", c.dispersion.c);
        r.get(n, "lambda_max", c.dispersion.lambda_max);
        r.get(n, "samples", c.dispersion.samples);
        r.reject_unknown(n);
    }
    if (const auto n = root["hypotheses"]) {
        detail::Reader r("hypotheses");
        r.get(n, "grid_n", c.hypotheses.grid_n);
        r.get(n, "tol_root", c.hypotheses.tol_root);
        r.reject_unknown(n);
    }
    if (const auto n = root["output"]) {
        detail::Reader r("output");
        r.get(n, "dir", c.output.dir);
        r.get(n, "emit_plot", c.output.emit_plot);
        r.reject_unknown(n);
    }
    validate(c);
    return c;
}

// "section.key=value" with a YAML scalar or flow value, applied before parsing.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key.path=value");
    const std::string path = assignment.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError(path, std::string("unparsable override value: ") + e.what());
    }
    if (!root || !root.IsMap()) root = YAML::Node(YAML::NodeType::Map);
    std::vector<std::string> keys;
    for (std::size_t start = 0;;) {
        const auto dot = path.find('.', start);
        keys.push_back(path.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    std::vector<YAML::Node> chain{root};
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        YAML::Node next = chain.back()[keys[i]];
        if (!next || !next.IsMap()) {
            chain.back()[keys[i]] = YAML::Node(YAML::NodeType::Map);
            next = chain.back()[keys[i]];
        }
        chain.push_back(next);
    }
    chain.back()[keys.back()] = value;
}

inline RunConfig load_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("<file>", std::string("YAML syntax error: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(root, o);
    return parse_config(root);
}

inline Nonlinearity build_nonlinearity(const NonlinearitySpec& s) {
    if (s.kind == "logistic") return Nonlinearity::logistic(s.r, s.a);
    std::vector<double> flat;
    for (const auto& row : s.values) flat.insert(flat.end(), row.begin(), row.end());
    return Nonlinearity::table(s.u, s.v, std::move(flat));
}

inline LatticeModel build_model(const RunConfig& c, std::optional<double> tau = std::nullopt) {
    return LatticeModel(c.model.D, tau.value_or(c.model.tau), build_nonlinearity(c.model.nonlinearity));
}

inline InitialData build_init(const InitSpec& s) {
    return s.kind == "bump" ? InitialData::bump(static_cast<int>(s.radius), s.height) : InitialData::profile(s.values);
}

inline WaveOptions build_wave_options(const RunConfig& c) {
    WaveOptions o;
    o.h = c.wave.h;
    o.xi_max = c.wave.xi_max;
    o.tol = c.wave.tol;
    o.max_iter = c.wave.max_iter;
    o.polish_tol = c.wave.polish_tol;
    o.max_depth = c.wave.max_depth;
    return o;
}

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
    const auto& g = c.model.nonlinearity;
    json nl = {{"kind", g.kind}};
    if (g.kind == "logistic") {
        nl["r"] = g.r;
        nl["a"] = g.a;
    } else {
        nl["u"] = g.u;
        nl["v"] = g.v;
        nl["values"] = g.values;
    }
    const auto& s = c.simulation;
    json init = {{"kind", s.init.kind}};
    if (s.init.kind == "bump") {
        init["radius"] = s.init.radius;
        init["height"] = s.init.height;
    } else {
        init["values"] = s.init.values;
    }
    const auto& w = c.wave;
    return {
        {"model", {{"D", c.model.D}, {"tau", c.model.tau}, {"nonlinearity", nl}}},
        {"simulation",
         {{"N", s.N}, {"dt", s.dt}, {"T", s.T}, {"stride", s.stride}, {"speed_bound_factor", s.speed_bound_factor},
          {"truncation_guard", s.truncation_guard}, {"init", init}}},
        {"analysis",
         {{"level", opt(c.analysis.level)}, {"discard_fraction", c.analysis.discard_fraction},
          {"inner_factor", c.analysis.inner_factor}, {"outer_factor", c.analysis.outer_factor},
          {"taus", c.analysis.taus}}},
        {"wave",
         {{"c", opt(w.c)}, {"c_factor", w.c_factor}, {"cmin", opt(w.cmin)}, {"cmax", opt(w.cmax)}, {"steps", w.steps},
          {"factors", w.factors}, {"h", w.h}, {"xi_max", w.xi_max}, {"tol", w.tol}, {"max_iter", w.max_iter},
          {"polish_tol", w.polish_tol}, {"max_depth", w.max_depth}}},
        {"dispersion",
         {{"c", opt(c.dispersion.c)}, {"lambda_max", c.dispersion.lambda_max}, {"samples", c.dispersion.samples}}},
        {"hypotheses", {{"grid_n", c.hypotheses.grid_n}, {"tol_root", c.hypotheses.tol_root}}},
        {"output", {{"dir", c.output.dir}, {"emit_plot", c.output.emit_plot}}},
    };
}

} // namespace dlat
