#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "dlat/dispersion.hpp"
#include "dlat/error.hpp"
#include "dlat/model.hpp"

namespace dlat {

struct WaveOptions {
    double h = 0.01;          // requested spacing; refined to 1/K and to c*tau/4
    double xi_max = 40.0;
    double tol = 1e-10;       // two-sided gap
    long max_iter = 20000;
    double polish_tol = 1e-12;  // sup change of the high-order Picard sweep
    long polish_max_iter = 200000;
    double max_depth = 2000.0;  // cap on -xi_min for the two-sided solve
    double anchor_factor = 1.2; // continuation starts from a profile at this multiple of c*
    double min_rate_ratio = 1.5;  // two-sided solve only when lambda2 / lambda1 reaches this
    int max_domain_doublings = 4; // xi_max doubles while the right limit is missed under (H4)
    double bracket_slack = 1e-12;
    double bracket_tol = 1e-6;
};

struct WaveGrid {
    double xi_min = 0.0;
    double xi_max = 0.0;
    double h = 0.0;
    long K = 0;           // grid points per unit lattice shift
    std::size_t size = 0;
    double beta = 0.0;    // kernel rate (2D + d) / c
    double d = 0.0;       // monotonicity shift

    double point(std::size_t i) const { return xi_min + double(i) * h; }
    std::vector<double> points() const {
        std::vector<double> x(size);
        for (std::size_t i = 0; i < size; ++i) x[i] = point(i);
        return x;
    }
};

// Left-tail continuation phi0 [e^{a x} + w (e^{b x} - e^{a x}) / (b - a)], x = xi - xi0.
struct TailClosure {
    double xi0 = 0.0;
    double value = 0.0;
    double rate_a = 1.0;
    double rate_b = 1.0;
    double weight = 0.0;

    static double mode(double a, double b, double x) {
        const double gap = b - a;
        if (std::abs(gap * x) < 1e-6) return x * std::exp(0.5 * (a + b) * x) * (1.0 + gap * gap * x * x / 24.0);
        return (std::exp(b * x) - std::exp(a * x)) / gap;
    }

    double operator()(double xi) const {
        const double x = xi - xi0;
        return value * (std::exp(rate_a * x) + weight * mode(rate_a, rate_b, x));
    }

    // Matches the value at xi0 and at xi0 + 1.
    static TailClosure fit(std::span<const double> phi, const WaveGrid& g, double a, double b) {
        TailClosure t{g.xi_min, phi[0], a, b, 0.0};
        if (phi[0] > 0.0) {
            const double rho = phi[static_cast<std::size_t>(g.K)] / phi[0];
            t.weight = (rho - std::exp(a)) / mode(a, b, 1.0);
        }
        return t;
    }
};

struct WaveProfile {
    double c = 0.0;           // requested speed
    double c_operator = 0.0;  // speed the operator was built with
    WaveGrid grid;            // coordinates after the gauge shift
    std::vector<double> phi;
    double residual_sup = 0.0;
    long iterations = 0;        // two-sided sweeps
    long polish_iterations = 0; // high-order Picard sweeps
    double gap = 0.0;
    double polish_change = 0.0;
    bool bracket_ok = false;
    double bracket_excess = 0.0;
    double q = 0.0;
    double eta = 0.0;
    RootPair roots{};           // discrete decay rates used by the bounds and the tail
    double E = 0.0;
    double gauge_shift = 0.0;   // native coordinate of phi = E/2
    std::string method;         // "two-sided" or "continuation"
    std::string right_regime;   // "limit" under H4, "liminf" otherwise
    bool left_ok = false;
    bool right_ok = false;
    TailClosure tail;

    // Cubic interpolation on the grid, tail closure on the left, constant on the right.
    double operator()(double xi) const;
};

namespace detail {

inline double lagrange4(const double v[4], double t) {
    // nodes at -1, 0, 1, 2; t in [0,1]
    const double a = -t * (t - 1.0) * (t - 2.0) / 6.0;
    const double b = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    const double c = -(t + 1.0) * t * (t - 2.0) / 2.0;
    const double d = (t + 1.0) * t * (t - 1.0) / 6.0;
    return a * v[0] + b * v[1] + c * v[2] + d * v[3];
}

template <class Ext>
double sample(std::span<const double> v, long i, const WaveGrid& g, const Ext& ext) {
    if (i < 0) return ext(g.point(0) + double(i) * g.h);
    if (i >= long(v.size())) return v.back();
    return v[static_cast<std::size_t>(i)];
}

template <class Ext>
double cubic_at(std::span<const double> v, double y, const WaveGrid& g, const Ext& ext) {
    const double base = std::floor(y);
    const long i = static_cast<long>(base);
    const double t = y - base;
    if (t == 0.0) return sample(v, i, g, ext);
    const double s[4] = {sample(v, i - 1, g, ext), sample(v, i, g, ext), sample(v, i + 1, g, ext),
                         sample(v, i + 2, g, ext)};
    return lagrange4(s, t);
}

} // namespace detail

inline double WaveProfile::operator()(double xi) const {
    const double y = (xi - grid.xi_min) / grid.h;
    if (y <= 0.0) return tail(xi + gauge_shift);
    if (y >= double(phi.size() - 1)) return phi.back();
    const TailClosure shifted{tail.xi0 - gauge_shift, tail.value, tail.rate_a, tail.rate_b, tail.weight};
    return detail::cubic_at(std::span<const double>(phi), y, grid, shifted);
}

// Discretised integral operator for one speed: exponential-weight Simpson recursion on a grid h = 1/K.
class WaveOperator {
public:
    enum class Interp { linear, cubic };

    // Grid spacing, kernel weights and discrete decay rates; the domain is set by place().
    WaveOperator(const LatticeModel& model, double c, const WaveOptions& opt) : model_(model), c_(c) {
        if (!std::isfinite(c) || c <= 0.0) throw InvalidInput("invalid_parameter", "wave speed must be finite and > 0");
        if (!(opt.h > 0.0) || !(opt.xi_max >= 40.0))
            throw InvalidInput("invalid_parameter", "wave grid needs h > 0 and xi_max >= 40");
        long K = static_cast<long>(std::ceil(1.0 / opt.h - 1e-9));
        if (model.tau > 0.0) K = std::max(K, static_cast<long>(std::ceil(4.0 / (c * model.tau) - 1e-9)));
        grid_.d = model.g.monotonicity_shift();
        grid_.beta = (2.0 * model.D + grid_.d) / c;
        rate0_ = model.g(0.0, 0.0);
        for (;;) {
            grid_.K = K;
            grid_.h = 1.0 / double(K);
            compute_weights();
            if (w_[0] > 0.0 && w_[1] > 0.0 && w_[2] > 0.0) break;
            K *= 2;
            if (K > (1L << 24)) throw NumericalFailure("weights_not_positive", "quadrature weights stay non-positive");
        }
        grid_.xi_max = std::ceil(opt.xi_max * double(K) - 1e-6) / double(K);
        locate_rates();
    }

    double c() const { return c_; }
    const WaveGrid& grid() const { return grid_; }
    const LatticeModel& model() const { return model_; }
    const std::array<double, 3>& weights() const { return w_; }
    double decay_factor() const { return e2_; }

    // Symbol of the discrete operator on e^{lambda xi}; decay rates solve symbol = 1.
    double symbol(double lambda) const {
        const double h = grid_.h;
        const double A = amplitude(lambda);
        const double num = w_[0] + w_[1] * std::exp(lambda * h) + w_[2] * std::exp(2.0 * lambda * h);
        return A * num / (std::exp(2.0 * lambda * h) - e2_);
    }
    double amplitude(double lambda) const { return grid_.d + 2.0 * model_.D * std::cosh(lambda) + rate0_; }

    // Discrete decay rates; a double root at the symbol minimiser when none are real.
    const RootPair& rates() const { return rates_; }
    bool has_distinct_rates() const { return !rates_.double_root; }

    void place(double xi_min) {
        const double K = double(grid_.K);
        grid_.xi_min = -std::ceil(-xi_min * K - 1e-6) / K;
        grid_.size = static_cast<std::size_t>(std::llround((grid_.xi_max - grid_.xi_min) * K)) + 1;
    }

    // F(phi, psi) with linear interpolation of the delayed argument and pure lambda1 tails.
    std::vector<double> apply_F(std::span<const double> phi, std::span<const double> psi) const {
        check_sizes(phi, psi);
        const double l1 = rates_.lambda1;
        const double x0 = grid_.xi_min;
        auto ext_phi = [&](double xi) { return phi[0] * std::exp(l1 * (xi - x0)); };
        auto ext_psi = [&](double xi) { return psi[0] * std::exp(l1 * (xi - x0)); };
        build_source(phi, psi, Interp::linear, ext_phi, ext_psi);
        const double A1 = amplitude(l1);
        return integrate(H_[0] / A1, H_[1] / A1);
    }

    // P(phi) = F(phi, phi) with cubic interpolation of the delay and a fitted two-rate tail; phi[0] is held.
    std::vector<double> apply_P(std::span<const double> phi, TailClosure* closure = nullptr) const {
        check_sizes(phi, phi);
        const TailClosure tail = TailClosure::fit(phi, grid_, rates_.lambda1, rates_.lambda2);
        if (closure) *closure = tail;
        build_source(phi, phi, Interp::cubic, tail, tail);
        return integrate(phi[0], tail(grid_.point(1)));
    }

    // phi_upper = min(e^{l1 xi}, 1), phi_lower = max(e^{l1 xi} - q e^{eta l1 xi}, 0).
    std::pair<std::vector<double>, std::vector<double>> bounds(double q, double eta) const {
        return bounds_on(grid_, rates_, q, eta);
    }

    static std::pair<std::vector<double>, std::vector<double>> bounds_on(const WaveGrid& g, const RootPair& roots,
                                                                         double q, double eta) {
        if (roots.double_root || !(roots.lambda2 > roots.lambda1))
            throw InvalidInput("invalid_parameter", "bounds need distinct decay rates");
        if (!(eta > 1.0 && eta < std::min(2.0, roots.lambda2 / roots.lambda1)))
            throw InvalidInput("invalid_parameter", "eta must lie in (1, min(2, lambda2/lambda1))");
        if (!(q > 1.0)) throw InvalidInput("invalid_parameter", "q must be > 1");
        std::vector<double> up(g.size), lo(g.size);
        for (std::size_t i = 0; i < g.size; ++i) {
            const double x = g.point(i);
            const double e = std::exp(roots.lambda1 * x);
            up[i] = std::min(e, 1.0);
            lo[i] = std::max(e - q * std::exp(eta * roots.lambda1 * x), 0.0);
        }
        return {std::move(up), std::move(lo)};
    }

private:
    void check_sizes(std::span<const double> a, std::span<const double> b) const {
        if (grid_.size < static_cast<std::size_t>(2 * grid_.K + 4) || a.size() != grid_.size || b.size() != grid_.size)
            throw InvalidInput("invalid_parameter", "grid functions must match the placed wave grid");
    }

    void compute_weights() {
        const double h = grid_.h, beta = grid_.beta;
        using boost::math::quadrature::gauss;
        auto weight = [&](int i) {
            auto basis = [&](double s) {
                const double x = s / h;
                switch (i) {
                case 0: return 0.5 * (x - 1.0) * (x - 2.0);
                case 1: return -x * (x - 2.0);
                default: return 0.5 * x * (x - 1.0);
                }
            };
            return gauss<double, 20>::integrate([&](double s) { return std::exp(-beta * (2.0 * h - s)) * basis(s); },
                                                0.0, 2.0 * h) / c_;
        };
        w_ = {weight(0), weight(1), weight(2)};
        e2_ = std::exp(-2.0 * beta * h);
    }

    void locate_rates() {
        // bracket the minimiser of the symbol by a coarse scan, then golden-section search
        const double top = 8.0 + 4.0 * std::log1p(c_ / model_.D);
        constexpr int samples = 4000;
        double best = std::numeric_limits<double>::infinity();
        int arg = 1;
        for (int i = 1; i <= samples; ++i) {
            const double s = symbol(top * i / samples);
            if (s < best) {
                best = s;
                arg = i;
            }
        }
        double a = top * (arg - 1) / samples, b = top * std::min(arg + 1, samples) / samples;
        const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
            const double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
            (symbol(x1) < symbol(x2) ? b : a) = symbol(x1) < symbol(x2) ? x2 : x1;
        }
        const double lm = 0.5 * (a + b);
        if (!(symbol(lm) < 1.0)) {
            rates_ = {c_, lm, lm, true};
            return;
        }
        auto f = [&](double l) { return symbol(l) - 1.0; };
        double hi = 2.0 * lm;
        while (f(hi) < 0.0) hi *= 2.0;
        rates_ = {c_, detail::bisect(f, 0.0, lm), detail::bisect(f, lm, hi), false};
    }

    template <class ExtA, class ExtB>
    void build_source(std::span<const double> phi, std::span<const double> psi, Interp interp, const ExtA& ext_phi,
                      const ExtB& ext_psi) const {
        const std::size_t n = grid_.size;
        const long K = grid_.K;
        H_.resize(n);
        const double lag = c_ * model_.tau / grid_.h;  // delay shift in grid units
        const bool delayed = model_.tau > 0.0;
        const double D = model_.D, d = grid_.d;
        for (std::size_t j = 0; j < n; ++j) {
            const long jj = long(j);
            const double p = phi[j];
            const double plus = jj + K < long(n) ? phi[j + static_cast<std::size_t>(K)] : phi[n - 1];
            const double minus = jj - K >= 0 ? phi[j - static_cast<std::size_t>(K)] : ext_phi(grid_.point(j) - 1.0);
            double v;
            if (!delayed) {
                v = psi[j];
            } else if (interp == Interp::cubic) {
                v = detail::cubic_at(psi, double(jj) - lag, grid_, ext_psi);
            } else {
                const double y = double(jj) - lag, base = std::floor(y), t = y - base;
                const long i = static_cast<long>(base);
                v = (1.0 - t) * detail::sample(psi, i, grid_, ext_psi) +
                    (t > 0.0 ? t * detail::sample(psi, i + 1, grid_, ext_psi) : 0.0);
            }
            H_[j] = d * p + D * (plus + minus) + p * model_.g(p, v);
        }
    }

    std::vector<double> integrate(double f0, double f1) const {
        const std::size_t n = grid_.size;
        std::vector<double> F(n);
        F[0] = f0;
        F[1] = f1;
        for (std::size_t j = 0; j + 2 < n; ++j) F[j + 2] = e2_ * F[j] + w_[0] * H_[j] + w_[1] * H_[j + 1] + w_[2] * H_[j + 2];
        return F;
    }

    LatticeModel model_;
    double c_;
    double rate0_ = 0.0;
    WaveGrid grid_;
    std::array<double, 3> w_{};
    double e2_ = 0.0;
    RootPair rates_{};
    mutable std::vector<double> H_;
};

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Two-sided monotone iteration L <- max(F(L,U), lower), U <- min(F(U,L), upper).
class BracketIteration {
public:
    BracketIteration(const WaveOperator& op, std::vector<double> lower, std::vector<double> upper)
        : op_(op), floor_(std::move(lower)), ceil_(std::move(upper)), L_(floor_), U_(ceil_) {
        gap_ = sup_distance(L_, U_);
    }

    void step() {
        auto Ln = op_.apply_F(L_, U_);
        auto Un = op_.apply_F(U_, L_);
        for (std::size_t i = 0; i < Ln.size(); ++i) {
            Ln[i] = std::max(Ln[i], floor_[i]);
            Un[i] = std::min(Un[i], ceil_[i]);
        }
        L_ = std::move(Ln);
        U_ = std::move(Un);
        gap_ = sup_distance(L_, U_);
        ++count_;
    }

    const std::vector<double>& lower() const { return L_; }
    const std::vector<double>& upper() const { return U_; }
    double gap() const { return gap_; }
    long count() const { return count_; }

private:
    const WaveOperator& op_;
    std::vector<double> floor_, ceil_, L_, U_;
    double gap_ = 0.0;
    long count_ = 0;
};

// Residual of c phi' = D (phi(xi+1) + phi(xi-1) - 2 phi) + phi g(phi, phi(xi - c tau)) on the interior.
inline std::vector<double> residual_field(const WaveProfile& p, const LatticeModel& model) {
    const auto& g = p.grid;
    const std::size_t n = p.phi.size();
    std::vector<double> R(n, std::numeric_limits<double>::quiet_NaN());
    const double lag = p.c_operator * model.tau / g.h;
    const long width = std::max<long>(g.K, static_cast<long>(std::ceil(lag)) + 2);
    const long skip = 2 * width + 2;
    const std::span<const double> phi(p.phi);
    auto none = [](double) { return 0.0; };
    for (long j = skip; j + skip < long(n); ++j) {
        const std::size_t i = static_cast<std::size_t>(j);
        const double dphi = (-phi[i + 2] + 8.0 * phi[i + 1] - 8.0 * phi[i - 1] + phi[i - 2]) / (12.0 * g.h);
        const double up = phi[i + static_cast<std::size_t>(g.K)], dn = phi[i - static_cast<std::size_t>(g.K)];
        const double v = model.tau > 0.0 ? detail::cubic_at(phi, double(j) - lag, g, none) : phi[i];
        R[i] = p.c_operator * dphi - model.D * (up + dn - 2.0 * phi[i]) - phi[i] * model.g(phi[i], v);
    }
    return R;
}

inline double profile_residual(const WaveProfile& p, const LatticeModel& model) {
    double m = 0.0;
    for (double r : residual_field(p, model))
        if (!std::isnan(r)) m = std::max(m, std::abs(r));
    return m;
}

namespace detail {

inline WaveOperator make_operator(const LatticeModel& model, double c, const WaveOptions& opt, double depth) {
    WaveOperator op(model, c, opt);
    op.place(-depth);
    return op;
}

// First crossing of `level` from the left, in native coordinates, located on the cubic interpolant.
template <class Ext>
double crossing(std::span<const double> phi, const WaveGrid& g, double level, const Ext& ext) {
    for (std::size_t i = 1; i < phi.size(); ++i)
        if (phi[i] >= level && phi[i - 1] < level) {
            double lo = double(i - 1), hi = double(i);
            for (int it = 0; it < 60 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (cubic_at(phi, mid, g, ext) < level ? lo : hi) = mid;
            }
            return g.xi_min + 0.5 * (lo + hi) * g.h;
        }
    throw NumericalFailure("no_crossing", "profile never reaches E/2");
}

struct PolishResult {
    std::vector<double> phi;
    long iterations = 0;
    double change = 0.0;
    TailClosure tail;
};

inline PolishResult polish(const WaveOperator& op, std::vector<double> phi, const WaveOptions& opt) {
    PolishResult r;
    for (;;) {
        auto next = op.apply_P(phi, &r.tail);
        r.change = sup_distance(next, phi);
        phi = std::move(next);
        ++r.iterations;
        if (r.change <= opt.polish_tol) break;
        if (!std::isfinite(r.change) || r.iterations >= opt.polish_max_iter)
            throw NumericalFailure("iteration_stalled",
                                   "iteration stalled: high-order sweep change " + std::to_string(r.change), r.change);
    }
    r.phi = std::move(phi);
    return r;
}

// Values of an existing profile on the operator's grid, read through a native-coordinate offset.
inline std::vector<double> resample(const WaveProfile& src, const WaveGrid& g, double offset) {
    std::vector<double> v(g.size);
    for (std::size_t i = 0; i < g.size; ++i) v[i] = std::clamp(src(g.point(i) + offset), 0.0, 1.0);
    return v;
}

inline void finish(WaveProfile& p, const WaveOperator& op, const LatticeModel& model, const WaveOptions& opt,
                   bool h4) {
    p.grid = op.grid();
    p.gauge_shift = crossing(std::span<const double>(p.phi), p.grid, 0.5 * p.E, p.tail);
    p.grid.xi_min -= p.gauge_shift;
    p.grid.xi_max -= p.gauge_shift;
    p.residual_sup = profile_residual(p, model);
    p.left_ok = p.phi.front() <= 1e-6;
    p.right_regime = h4 ? "limit" : "liminf";
    if (h4) {
        p.right_ok = std::abs(p.phi.back() - p.E) <= 1e-3;
    } else {
        double m = 1.0;
        for (std::size_t i = p.phi.size() / 2; i < p.phi.size(); ++i) m = std::min(m, p.phi[i]);
        p.right_ok = m >= 1e-2;
    }
    (void)opt;
}

} // namespace detail

namespace detail {

inline WaveProfile solve_on_domain(double c, const LatticeModel& model, const WaveOptions& opt);

} // namespace detail

// Two-sided solve plus high-order polish when the bracket fits on a grid of depth <= max_depth and
// lambda2 / lambda1 >= min_rate_ratio; otherwise Picard continuation from a profile at anchor_factor * c*.
inline WaveProfile solve_profile(double c, const LatticeModel& model, const WaveOptions& opt = {}) {
    WaveOptions o = opt;
    for (int k = 0;; ++k) {
        WaveProfile p = detail::solve_on_domain(c, model, o);
        if (p.right_ok || p.right_regime != "limit" || k >= opt.max_domain_doublings) return p;
        o.xi_max *= 2.0;
    }
}

inline WaveProfile detail::solve_on_domain(double c, const LatticeModel& model, const WaveOptions& opt) {
    if (!(opt.tol > 0.0) || opt.max_iter < 1 || !(opt.polish_tol > 0.0))
        throw InvalidInput("invalid_parameter", "tol, polish_tol must be > 0 and max_iter >= 1");
    const double rate = model.linearization_rate();
    const auto res = compute_cstar(model.D, rate);
    characteristic_roots(c, res);  // throws below the critical speed
    const auto rep = check_hypotheses(model.g, 64, 1e-10);
    const double E = invaded_state(model.g);

    WaveProfile p;
    p.c = c;
    p.E = E;
    p.c_operator = std::abs(c - res.c_star) <= critical_band ? res.c_star + 1e-6 : c;

    WaveOperator probe(model, p.c_operator, opt);
    const RootPair& rates = probe.rates();
    double depth = std::numeric_limits<double>::infinity();
    double eta = 0.0;
    if (!rates.double_root && rates.lambda2 >= opt.min_rate_ratio * rates.lambda1) {
        eta = 0.5 * (1.0 + std::min(2.0, rates.lambda2 / rates.lambda1));
        const double need = (std::log(65536.0) + std::log(1e3 / opt.tol)) / ((eta - 1.0) * rates.lambda1);
        depth = std::max(40.0 / rates.lambda1, need);
    }

    if (depth <= opt.max_depth) {
        WaveOperator op = probe;
        op.place(-depth);
        double q = 2.0;
        std::vector<double> up, lo;
        for (;;) {
            std::tie(up, lo) = op.bounds(q, eta);
            const auto Fl = op.apply_F(lo, up), Fu = op.apply_F(up, lo);
            bool holds = true;
            for (std::size_t i = 0; i < lo.size() && holds; ++i)
                holds = Fl[i] >= lo[i] - opt.bracket_slack && Fu[i] <= up[i] + opt.bracket_slack;
            if (holds) break;
            q *= 2.0;
            if (q > 65536.0) throw NumericalFailure("no_bracket", "upper/lower inequality fails for every q <= 2^16");
        }
        BracketIteration it(op, lo, up);
        while (it.gap() > opt.tol) {
            if (it.count() >= opt.max_iter)
                throw NumericalFailure("iteration_stalled", "iteration stalled: gap " + std::to_string(it.gap()),
                                       it.gap());
            it.step();
        }
        std::vector<double> mid(lo.size());
        for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (it.lower()[i] + it.upper()[i]);
        auto pol = detail::polish(op, std::move(mid), opt);

        p.method = "two-sided";
        p.q = q;
        p.eta = eta;
        p.iterations = it.count();
        p.gap = it.gap();
        p.roots = rates;
        p.polish_iterations = pol.iterations;
        p.polish_change = pol.change;
        p.tail = pol.tail;
        p.phi = std::move(pol.phi);
        p.bracket_excess = 0.0;
        for (std::size_t i = 0; i < p.phi.size(); ++i)
            p.bracket_excess = std::max({p.bracket_excess, lo[i] - p.phi[i], p.phi[i] - up[i]});
        p.bracket_ok = p.bracket_excess <= opt.bracket_tol;
        detail::finish(p, op, model, opt, rep.h4_ok);
        return p;
    }

    // continuation
    const double anchor_c = std::max(opt.anchor_factor, 1.05) * res.c_star;
    if (anchor_c <= c) throw NumericalFailure("no_bracket", "bracket does not fit the maximal domain depth");
    const WaveProfile anchor = solve_profile(anchor_c, model, opt);

    const double lam = rates.lambda1;
    WaveOperator op = probe;
    op.place(-std::max(40.0 / lam, 60.0));
    std::vector<double> phi = detail::resample(anchor, op.grid(), 0.0);
    detail::PolishResult pol;
    long total = 0;
    for (int pass = 0; pass < 4; ++pass) {
        pol = detail::polish(op, std::move(phi), opt);
        total += pol.iterations;
        const double s = detail::crossing(std::span<const double>(pol.phi), op.grid(), 0.5 * E, pol.tail);
        if (std::abs(s) <= 1.0) break;
        WaveProfile tmp;
        tmp.grid = op.grid();
        tmp.phi = pol.phi;
        tmp.tail = pol.tail;
        phi = detail::resample(tmp, op.grid(), s);
    }
    p.method = "continuation";
    p.roots = rates;
    p.iterations = 0;
    p.polish_iterations = total;
    p.polish_change = pol.change;
    p.tail = pol.tail;
    p.phi = std::move(pol.phi);
    p.bracket_ok = false;
    detail::finish(p, op, model, opt, rep.h4_ok);
    return p;
}

// sup |P(phi) - phi| of the operator the profile was polished with.
inline double fixed_point_defect(const WaveProfile& p, const LatticeModel& model, const WaveOptions& opt = {}) {
    WaveOptions o = opt;
    o.xi_max = p.grid.xi_max + p.gauge_shift;
    WaveOperator op(model, p.c_operator, o);
    op.place(p.grid.xi_min + p.gauge_shift);
    if (op.grid().size != p.phi.size() || op.grid().K != p.grid.K)
        throw InvalidInput("invalid_parameter", "profile grid does not match the options");
    return sup_distance(op.apply_P(p.phi), p.phi);
}

struct ScanRow {
    double c = 0.0;
    double ratio = 0.0;  // c / c*
    std::string status;  // "converged", "no admissible decay rate", "stalled", "failed"
    std::string method;
    double residual = std::numeric_limits<double>::quiet_NaN();
    double left_value = std::numeric_limits<double>::quiet_NaN();
    double right_value = std::numeric_limits<double>::quiet_NaN();
    double lambda1 = std::numeric_limits<double>::quiet_NaN();
    long iterations = 0;
    std::string message;
};

inline ScanRow scan_one(const LatticeModel& model, double c, double c_star, const WaveOptions& opt) {
    ScanRow row;
    row.c = c;
    row.ratio = c / c_star;
    try {
        const auto p = solve_profile(c, model, opt);
        row.status = p.left_ok && p.right_ok ? "converged" : "failed";
        row.method = p.method;
        row.residual = p.residual_sup;
        row.left_value = p.phi.front();
        row.right_value = p.phi.back();
        row.lambda1 = p.roots.lambda1;
        row.iterations = p.iterations + p.polish_iterations;
        if (!(p.left_ok && p.right_ok)) row.message = "boundary limits not reached";
    } catch (const Error& e) {
        row.status = e.code() == "no_real_roots" ? "no admissible decay rate"
                     : e.code() == "iteration_stalled" ? "stalled"
                                                       : "failed";
        row.message = e.what();
    }
    return row;
}

// One solver per speed, run concurrently.
inline std::vector<ScanRow> scan_wavespeeds(const LatticeModel& model, const std::vector<double>& speeds,
                                            const WaveOptions& opt = {}) {
    const double c_star = compute_cstar(model.D, model.linearization_rate()).c_star;
    std::vector<std::future<ScanRow>> jobs;
    for (double c : speeds) jobs.push_back(std::async(std::launch::async, scan_one, std::cref(model), c, c_star, std::cref(opt)));
    std::vector<ScanRow> rows;
    for (auto& j : jobs) rows.push_back(j.get());
    return rows;
}

} // namespace dlat
