#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dlat/error.hpp"

namespace dlat {

// Birth/competition term g(u, v): u is the local density, v the delayed one.
class Nonlinearity {
public:
    using Fn = std::function<double(double, double)>;

    struct Logistic {
        double r;
        double a;
        std::optional<double> frozen_v;  // set for undelayed auxiliary problems
    };

    // Bilinear interpolation on a rectangular node set, values[iu * v.size() + iv].
    // Linear extrapolation in u outside the nodes, clamped in v.
    struct Table {
        std::vector<double> u;
        std::vector<double> v;
        std::vector<double> values;
        std::optional<double> frozen_v;
    };

    struct Custom {
        std::shared_ptr<const Fn> fn;
        std::string label;
    };

    enum class Kind { logistic, table, custom };

    static Nonlinearity logistic(double r, double a) {
        if (!std::isfinite(r) || r <= 0.0)
            throw InvalidInput("invalid_parameter", "logistic r must be finite and > 0");
        if (!std::isfinite(a))
            throw InvalidInput("invalid_parameter", "logistic a must be finite");
        return Nonlinearity(Logistic{r, a, std::nullopt}, r * std::max(1.0, std::abs(a)));
    }

    static Nonlinearity table(std::vector<double> u, std::vector<double> v, std::vector<double> values) {
        auto increasing = [](const std::vector<double>& x) {
            if (x.size() < 2) return false;
            for (std::size_t i = 0; i + 1 < x.size(); ++i)
                if (!(x[i] < x[i + 1]) || !std::isfinite(x[i]) || !std::isfinite(x[i + 1])) return false;
            return true;
        };
        if (!increasing(u) || !increasing(v))
            throw InvalidInput("invalid_table", "table nodes must be finite, strictly increasing, at least 2 per axis");
        if (values.size() != u.size() * v.size())
            throw InvalidInput("invalid_table", "table values must have size(u) * size(v) entries");
        for (double x : values)
            if (!std::isfinite(x)) throw InvalidInput("invalid_table", "table values must be finite");

        const std::size_t nv = v.size();
        double lip = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < nv; ++j) {
                const double g = values[i * nv + j];
                if (i + 1 < u.size())
                    lip = std::max(lip, std::abs(values[(i + 1) * nv + j] - g) / (u[i + 1] - u[i]));
                if (j + 1 < nv)
                    lip = std::max(lip, std::abs(values[i * nv + j + 1] - g) / (v[j + 1] - v[j]));
            }
        return Nonlinearity(Table{std::move(u), std::move(v), std::move(values), std::nullopt}, lip);
    }

    // The bound is spot-checked with difference quotients on a 33 x 33 grid of [0,1]^2.
    static Nonlinearity custom(Fn fn, double lipschitz_bound, std::string label = "custom") {
        if (!fn) throw InvalidInput("invalid_parameter", "custom nonlinearity needs an evaluator");
        if (!std::isfinite(lipschitz_bound) || lipschitz_bound < 0.0)
            throw InvalidInput("invalid_parameter", "lipschitz_bound must be finite and >= 0");
        constexpr int n = 32;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                const double u = double(i) / n, v = double(j) / n;
                const double g = fn(u, v);
                if (!std::isfinite(g))
                    throw InvalidInput("nonfinite_evaluation", "custom nonlinearity returned a non-finite value");
                const double step = 1.0 / n;
                const double slack = lipschitz_bound * step * (1.0 + 1e-9) + 1e-12;
                if ((i < n && std::abs(fn(u + step, v) - g) > slack) ||
                    (j < n && std::abs(fn(u, v + step) - g) > slack))
                    throw InvalidInput("lipschitz_bound_too_small",
                                       "difference quotient of '" + label + "' exceeds its lipschitz_bound");
            }
        return Nonlinearity(Custom{std::make_shared<const Fn>(std::move(fn)), std::move(label)}, lipschitz_bound);
    }

    double operator()(double u, double v) const {
        switch (impl_.index()) {
        case 0: {
            const auto& p = std::get<Logistic>(impl_);
            return p.r * (1.0 - u - p.a * (p.frozen_v ? *p.frozen_v : v));
        }
        case 1: return eval_table(std::get<Table>(impl_), u, v);
        default: return (*std::get<Custom>(impl_).fn)(u, v);
        }
    }

    Kind kind() const { return static_cast<Kind>(impl_.index()); }

    // Valid constant for |g(p) - g(q)| <= L (|du| + |dv|) on [0,1]^2.
    double lipschitz_bound() const { return lipschitz_; }

    const Logistic* as_logistic() const { return std::get_if<Logistic>(&impl_); }
    const Table* as_table() const { return std::get_if<Table>(&impl_); }

    std::string label() const {
        switch (kind()) {
        case Kind::logistic: return "logistic";
        case Kind::table: return "table";
        default: return std::get<Custom>(impl_).label;
        }
    }

    // g(u, v0) regardless of the second argument.
    Nonlinearity with_fixed_delay(double v0) const {
        Nonlinearity out = *this;
        if (auto* p = std::get_if<Logistic>(&out.impl_)) {
            p->frozen_v = v0;
        } else if (auto* t = std::get_if<Table>(&out.impl_)) {
            t->frozen_v = v0;
        } else {
            auto fn = std::get<Custom>(impl_).fn;
            out.impl_ = Custom{std::make_shared<const Fn>([fn, v0](double u, double) { return (*fn)(u, v0); }),
                               std::get<Custom>(impl_).label + "|v=" + std::to_string(v0)};
        }
        return out;
    }

    // Shift making s -> d s + s g(s, v) nondecreasing on [0,1] for every v in [0,1].
    double monotonicity_shift() const {
        if (const auto* p = as_logistic(); p && !p->frozen_v && p->a >= 0.0) return p->r * (1.0 + p->a) + 1.0;
        double sup = 0.0;
        constexpr int n = 64;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) sup = std::max(sup, std::abs((*this)(double(i) / n, double(j) / n)));
        return sup + lipschitz_ + 1.0;
    }

private:
    using Impl = std::variant<Logistic, Table, Custom>;

    Nonlinearity(Impl impl, double lip) : impl_(std::move(impl)), lipschitz_(lip) {}

    static double eval_table(const Table& t, double u, double v) {
        if (t.frozen_v) v = *t.frozen_v;
        auto cell = [](const std::vector<double>& x, double p) {
            auto it = std::upper_bound(x.begin(), x.end(), p);
            auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x.begin() - 1, 0));
            return std::min(i, x.size() - 2);
        };
        v = std::clamp(v, t.v.front(), t.v.back());
        const std::size_t i = cell(t.u, u), j = cell(t.v, v), nv = t.v.size();
        const double su = (u - t.u[i]) / (t.u[i + 1] - t.u[i]);
        const double sv = (v - t.v[j]) / (t.v[j + 1] - t.v[j]);
        const double g00 = t.values[i * nv + j], g01 = t.values[i * nv + j + 1];
        const double g10 = t.values[(i + 1) * nv + j], g11 = t.values[(i + 1) * nv + j + 1];
        return (1 - su) * ((1 - sv) * g00 + sv * g01) + su * ((1 - sv) * g10 + sv * g11);
    }

    Impl impl_;
    double lipschitz_;
};

struct LatticeModel {
    double D;
    double tau;
    Nonlinearity g;

    LatticeModel(double coupling, double delay, Nonlinearity nonlinearity)
        : D(coupling), tau(delay), g(std::move(nonlinearity)) {
        if (!std::isfinite(D) || D <= 0.0) throw InvalidInput("invalid_parameter", "D must be finite and > 0");
        if (!std::isfinite(tau) || tau < 0.0) throw InvalidInput("invalid_parameter", "tau must be finite and >= 0");
    }

    double linearization_rate() const { return g(0.0, 0.0); }
};

struct Violation {
    std::string hypothesis;  // "H1".."H4"
    double u;
    double v;
    double value;
    std::string detail;
};

struct HypothesisReport {
    bool h1_ok = true;
    bool h2_ok = true;
    bool h3_ok = true;
    bool h4_ok = true;
    std::optional<double> E;
    std::vector<Violation> violations;
    int grid_n = 0;
    double tol_root = 0.0;
    std::string note = "finite-grid screen: necessary conditions only";

    bool all_ok() const { return h1_ok && h2_ok && h3_ok && h4_ok; }
};

namespace detail {

inline double checked(const Nonlinearity& g, double u, double v) {
    const double x = g(u, v);
    if (!std::isfinite(x))
        throw InvalidInput("nonfinite_evaluation",
                           "nonlinearity returned a non-finite value at (" + std::to_string(u) + ", " +
                               std::to_string(v) + ")");
    return x;
}

// Root of e -> g(e,e) on (0,1), assuming g(0,0) > 0 > g(1,1).
inline double diagonal_root(const Nonlinearity& g) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double x = checked(g, mid, mid);
        if (x == 0.0) return mid;
        (x > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

inline double equilibrium(const Nonlinearity& g, double tol_root = 1e-10) {
    if (!(tol_root > 0.0)) throw InvalidInput("invalid_parameter", "tol_root must be > 0");
    const double g0 = detail::checked(g, 0.0, 0.0), g1 = detail::checked(g, 1.0, 1.0);
    if (!(g0 > 0.0 && g1 < 0.0))
        throw NumericalFailure("no_equilibrium", "no positive equilibrium on (0,1)");
    const double e = detail::diagonal_root(g);
    if (std::abs(g(e, e)) > tol_root)
        throw NumericalFailure("no_equilibrium", "diagonal root does not meet tol_root", g(e, e));
    return e;
}

// State behind an invasion front: E when it exists, else 1 when g(1,1) = 0 (e.g. logistic with a = 0).
inline double invaded_state(const Nonlinearity& g, double tol_root = 1e-10) {
    const double g1 = detail::checked(g, 1.0, 1.0);
    if (std::abs(g1) <= tol_root && detail::checked(g, 0.0, 0.0) > 0.0) return 1.0;
    return equilibrium(g, tol_root);
}

inline HypothesisReport check_hypotheses(const Nonlinearity& g, int grid_n = 64, double tol_root = 1e-10) {
    if (grid_n < 16) throw InvalidInput("invalid_parameter", "grid_n must be >= 16");
    if (!(tol_root > 0.0)) throw InvalidInput("invalid_parameter", "tol_root must be > 0");

    HypothesisReport rep;
    rep.grid_n = grid_n;
    rep.tol_root = tol_root;
    constexpr std::size_t max_witnesses = 8;
    auto flag = [&](bool& ok, const char* id, double u, double v, double value, std::string detail) {
        ok = false;
        std::size_t count = 0;
        for (const auto& w : rep.violations) count += (w.hypothesis == id);
        if (count < max_witnesses) rep.violations.push_back({id, u, v, value, std::move(detail)});
    };
    const auto at = [&](int i) { return double(i) / grid_n; };
    const auto G = [&](double u, double v) { return detail::checked(g, u, v); };

    // H1
    if (const double x = G(1.0, 0.0); std::abs(x) > tol_root) flag(rep.h1_ok, "H1", 1.0, 0.0, x, "g(1,0) != 0");
    for (int i = 1; i < grid_n; ++i)
        if (const double x = G(at(i), 0.0); !(x > 0.0)) flag(rep.h1_ok, "H1", at(i), 0.0, x, "g(u,0) <= 0 on (0,1)");

    // H2: strict decrease in u, nonincrease in v, along grid lines of [0,1]^2
    for (int i = 0; i <= grid_n; ++i)
        for (int j = 0; j <= grid_n; ++j) {
            const double x = G(at(i), at(j));
            if (i < grid_n) {
                const double du = G(at(i + 1), at(j)) - x;
                if (!(du < 0.0)) flag(rep.h2_ok, "H2", at(i), at(j), du, "not strictly decreasing in u");
            }
            if (j < grid_n) {
                const double dv = G(at(i), at(j + 1)) - x;
                if (dv > 0.0) flag(rep.h2_ok, "H2", at(i), at(j), dv, "increasing in v");
            }
        }
    if (const double x = G(10.0, 0.0); !(x < 0.0)) flag(rep.h2_ok, "H2", 10.0, 0.0, x, "g(10,0) >= 0");

    // H3
    const double g01 = G(0.0, 1.0);
    if (!(g01 > 0.0)) flag(rep.h3_ok, "H3", 0.0, 1.0, g01, "g(0,1) <= 0");
    const double g00 = G(0.0, 0.0), g11 = G(1.0, 1.0);
    if (g00 > 0.0 && g11 < 0.0) {
        const double e = detail::diagonal_root(g);
        if (std::abs(G(e, e)) <= tol_root) rep.E = e;
    }
    if (!rep.E) flag(rep.h3_ok, "H3", g00 > 0.0 ? 1.0 : 0.0, g00 > 0.0 ? 1.0 : 0.0, g00 > 0.0 ? g11 : g00,
                     "no sign change of g(e,e) inside (0,1)");

    // H4: ordered pairs lo <= hi in (0,1) with g(lo,hi) <= 0 <= g(hi,lo) must collapse onto (E,E)
    for (int i = 1; i < grid_n; ++i)
        for (int j = i; j < grid_n; ++j) {
            const double lo = at(i), hi = at(j);
            const double a = G(lo, hi), b = G(hi, lo);
            if (a <= 0.0 && b >= 0.0) {
                const bool at_e = rep.E && std::abs(lo - *rep.E) <= tol_root && std::abs(hi - *rep.E) <= tol_root;
                if (!at_e) flag(rep.h4_ok, "H4", lo, hi, a, "g(lo,hi) <= 0 <= g(hi,lo) away from (E,E)");
            }
        }
    return rep;
}

} // namespace dlat
