#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dlat/error.hpp"
#include "dlat/model.hpp"

namespace dlat {

// Initial history phi_n(s), s in [-tau, 0].
class InitialData {
public:
    using History = std::function<double(long n, double s)>;

    // Constant-in-s data; values[k] is the density at site k - M with M = (size - 1) / 2.
    static InitialData profile(std::vector<double> values) {
        if (values.empty() || values.size() % 2 == 0)
            throw InvalidInput("invalid_initial_data", "profile needs an odd number of values centred on n = 0");
        const long M = static_cast<long>(values.size() / 2);
        auto data = std::make_shared<const std::vector<double>>(std::move(values));
        return InitialData(
            [data, M](long n, double) { return std::abs(n) <= M ? (*data)[static_cast<std::size_t>(n + M)] : 0.0; },
            M, true);
    }

    static InitialData bump(int radius, double height) {
        if (radius < 0) throw InvalidInput("invalid_initial_data", "bump radius must be >= 0");
        return profile(std::vector<double>(2 * static_cast<std::size_t>(radius) + 1, height));
    }

    // Sampled history; values outside |n| <= M are taken as 0.
    static InitialData history(History fn, long support_radius) {
        if (!fn || support_radius < 0) throw InvalidInput("invalid_initial_data", "history needs a sampler and M >= 0");
        auto f = std::make_shared<const History>(std::move(fn));
        return InitialData([f, support_radius](long n, double s) { return std::abs(n) <= support_radius ? (*f)(n, s) : 0.0; },
                           support_radius, false);
    }

    // History without compact support (e.g. a travelling-wave profile); only usable with the truncation guard off.
    static InitialData unbounded(History fn) {
        if (!fn) throw InvalidInput("invalid_initial_data", "history needs a sampler");
        return InitialData(std::move(fn), std::nullopt, false);
    }

    double operator()(long n, double s) const { return (*fn_)(n, s); }
    std::optional<long> support_radius() const { return support_; }
    bool constant_in_s() const { return constant_; }

    // Data moved k sites to the right.
    InitialData shifted(long k) const {
        auto f = fn_;
        return InitialData([f, k](long n, double s) { return (*f)(n - k, s); },
                           support_ ? std::optional<long>(*support_ + std::abs(k)) : std::nullopt, constant_);
    }

    InitialData scaled(double factor) const {
        auto f = fn_;
        return InitialData([f, factor](long n, double s) { return factor * (*f)(n, s); }, support_, constant_);
    }

private:
    InitialData(History fn, std::optional<long> support, bool constant)
        : fn_(std::make_shared<const History>(std::move(fn))), support_(support), constant_(constant) {}

    std::shared_ptr<const History> fn_;
    std::optional<long> support_;
    bool constant_;
};

struct InitialDataReport {
    bool in_range = true;            // 0 <= phi <= 1
    bool positive_somewhere = false; // phi_n(0) > 0 for some n
    bool continuous = true;          // adjacent-sample jumps within lipschitz * step
    double max_jump_rate = 0.0;
};

// Screens the history on sites |n| <= N at the step grid s = -k dt.
inline InitialDataReport inspect_initial_data(const InitialData& init, double tau, double dt, long N,
                                              double lipschitz_in_s = std::numeric_limits<double>::infinity()) {
    InitialDataReport rep;
    const long steps = tau > 0.0 ? static_cast<long>(std::ceil(tau / dt - 1e-9)) : 0;
    for (long n = -N; n <= N; ++n) {
        double prev = init(n, 0.0);
        rep.positive_somewhere = rep.positive_somewhere || prev > 0.0;
        for (long k = 0; k <= steps; ++k) {
            const double s = steps > 0 ? -tau * double(k) / double(steps) : 0.0;
            const double x = init(n, s);
            if (!(x >= 0.0 && x <= 1.0)) rep.in_range = false;
            if (k > 0) {
                const double rate = std::abs(x - prev) / (tau / double(steps));
                rep.max_jump_rate = std::max(rep.max_jump_rate, rate);
                if (rate > lipschitz_in_s) rep.continuous = false;
            }
            prev = x;
        }
    }
    return rep;
}

struct SimulationOptions {
    long N = 600;
    double dt = 0.02;
    double T = 200.0;
    long stride = 1;           // store every stride-th step
    double speed_bound = 0.0;  // a-priori front speed for the lattice-size check; 0 skips it
    bool truncation_guard = true;
    double guard_level = 1e-6;
    long guard_sites = 5;
};

inline constexpr double bound_slack = 1e-8;

// dt snapped to tau / m with m >= 3 whole steps per delay; m = 0 when tau = 0.
struct StepGrid {
    double dt;
    long delay_steps;
};

inline StepGrid snap_step(double tau, double dt) {
    if (!std::isfinite(dt) || dt <= 0.0) throw InvalidInput("invalid_parameter", "dt must be finite and > 0");
    if (tau == 0.0) return {dt, 0};
    const long m = std::max(3L, static_cast<long>(std::ceil(tau / dt - 1e-9)));
    return {tau / double(m), m};
}

inline double stable_step_limit(const LatticeModel& model) {
    return 0.1 / (4.0 * model.D + model.g.lipschitz_bound());
}

// Explicit RK4 on the truncated lattice with ghost zeros at n = +-(N+1).
class LatticeStepper {
public:
    LatticeStepper(LatticeModel model, const InitialData& init, long N, double dt)
        : model_(std::move(model)), init_(init), N_(N), width_(2 * N + 1) {
        if (N < 1) throw InvalidInput("invalid_parameter", "lattice half-width N must be >= 1");
        if (dt > stable_step_limit(model_) * (1.0 + 1e-9))
            throw InvalidInput("unstable_step", "dt exceeds the stability bound 0.1/(4D + lipschitz_bound)");
        const StepGrid grid = snap_step(model_.tau, dt);
        dt_ = grid.dt;
        m_ = grid.delay_steps;
        ring_.assign(static_cast<std::size_t>(m_ + 4), std::vector<double>(width_, 0.0));
        for (long i = -m_; i <= 0; ++i) {
            auto& row = slot(i);
            for (long n = -N_; n <= N_; ++n) {
                const double x = init_(n, double(i) * dt_);
                if (!std::isfinite(x) || x < -1e-12 || x > 1.0 + 1e-12)
                    throw InvalidInput("invalid_initial_data", "initial history must lie in [0,1]");
                row[static_cast<std::size_t>(n + N_)] = x;
            }
        }
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &stage_, &lagged_}) v->assign(width_, 0.0);
    }

    void step() {
        const std::vector<double>& u = slot(k_);
        const long j = k_ - m_;

        delayed_at_node(j, lagged_);
        rhs(u, lagged_, k1_);
        delayed_at_half(j, lagged_);
        axpy(u, 0.5 * dt_, k1_, stage_);
        rhs(stage_, lagged_, k2_);
        axpy(u, 0.5 * dt_, k2_, stage_);
        rhs(stage_, lagged_, k3_);
        delayed_at_node(j + 1, lagged_);
        axpy(u, dt_, k3_, stage_);
        rhs(stage_, lagged_, k4_);

        std::vector<double>& next = slot(k_ + 1);
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < width_; ++i) {
            next[i] = u[i] + dt_ / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
            lo = std::min(lo, next[i]);
            hi = std::max(hi, next[i]);
        }
        ++k_;
        min_ = std::min(min_, lo);
        max_ = std::max(max_, hi);
        if (!(lo >= -bound_slack && hi <= 1.0 + bound_slack))
            throw NumericalFailure("bound_breach",
                                   "bound breach at t = " + std::to_string(time()) + " (min " + std::to_string(lo) +
                                       ", max " + std::to_string(hi) + "); dt too large?",
                                   lo < -bound_slack ? lo : hi);
    }

    std::span<const double> state() const { return slot(k_); }
    // Last m + 1 states, oldest first.
    std::vector<std::vector<double>> recent_history() const {
        std::vector<std::vector<double>> out;
        for (long i = k_ - m_; i <= k_; ++i) out.push_back(slot(i));
        return out;
    }
    long steps() const { return k_; }
    double time() const { return double(k_) * dt_; }
    double dt() const { return dt_; }
    long delay_steps() const { return m_; }
    long N() const { return N_; }
    double min_seen() const { return min_; }
    double max_seen() const { return max_; }

private:
    std::vector<double>& slot(long i) { return ring_[static_cast<std::size_t>((i + m_) % long(ring_.size()))]; }
    const std::vector<double>& slot(long i) const {
        return ring_[static_cast<std::size_t>((i + m_) % long(ring_.size()))];
    }

    void rhs(const std::vector<double>& u, const std::vector<double>& lag, std::vector<double>& out) const {
        const double D = model_.D;
        const bool undelayed = m_ == 0;
        for (std::size_t i = 0; i < width_; ++i) {
            const double left = i > 0 ? u[i - 1] : 0.0;
            const double right = i + 1 < width_ ? u[i + 1] : 0.0;
            out[i] = D * (right - 2.0 * u[i] + left) + u[i] * model_.g(u[i], undelayed ? u[i] : lag[i]);
        }
    }

    void axpy(const std::vector<double>& u, double a, const std::vector<double>& k, std::vector<double>& out) const {
        for (std::size_t i = 0; i < width_; ++i) out[i] = u[i] + a * k[i];
    }

    void delayed_at_node(long j, std::vector<double>& out) const {
        if (m_ == 0) return;
        out = slot(j);
    }

    // u at step index j + 1/2; the cubic stencil stays inside one delay interval [p m, (p+1) m].
    void delayed_at_half(long j, std::vector<double>& out) const {
        if (m_ == 0) return;
        if (j + 1 <= 0) {
            const double s = (double(j) + 0.5) * dt_;
            for (long n = -N_; n <= N_; ++n) out[static_cast<std::size_t>(n + N_)] = init_(n, s);
            return;
        }
        long first;
        double w[4];
        if (j % m_ == 0) {
            first = j;
            w[0] = 5.0 / 16; w[1] = 15.0 / 16; w[2] = -5.0 / 16; w[3] = 1.0 / 16;
        } else if ((j + 1) % m_ == 0) {
            first = j - 2;
            w[0] = 1.0 / 16; w[1] = -5.0 / 16; w[2] = 15.0 / 16; w[3] = 5.0 / 16;
        } else {
            first = j - 1;
            w[0] = -1.0 / 16; w[1] = 9.0 / 16; w[2] = 9.0 / 16; w[3] = -1.0 / 16;
        }
        const auto &a = slot(first), &b = slot(first + 1), &c = slot(first + 2), &d = slot(first + 3);
        for (std::size_t i = 0; i < width_; ++i) out[i] = w[0] * a[i] + w[1] * b[i] + w[2] * c[i] + w[3] * d[i];
    }

    LatticeModel model_;
    InitialData init_;
    long N_;
    std::size_t width_;
    double dt_ = 0.0;
    long m_ = 0;
    long k_ = 0;
    double min_ = 0.0, max_ = 0.0;
    std::vector<std::vector<double>> ring_;
    std::vector<double> k1_, k2_, k3_, k4_, stage_, lagged_;
};

struct Trajectory {
    LatticeModel model;
    long N = 0;
    double dt = 0.0;        // snapped step
    long stride = 1;
    long delay_steps = 0;
    std::vector<double> times{};
    std::vector<double> values{};  // frame-major, width() entries per stored time
    std::vector<std::vector<double>> history{};  // last delay_steps + 1 states at the final time
    double min_value = 0.0;
    double max_value = 0.0;

    std::size_t width() const { return static_cast<std::size_t>(2 * N + 1); }
    std::size_t frames() const { return times.size(); }
    std::span<const double> state(std::size_t k) const { return {values.data() + k * width(), width()}; }
    double at(std::size_t k, long n) const { return values[k * width() + static_cast<std::size_t>(n + N)]; }
};

namespace detail {

inline void check_guard(std::span<const double> u, const SimulationOptions& opt, double t) {
    const std::size_t w = u.size(), g = static_cast<std::size_t>(std::min<long>(opt.guard_sites, long(w) / 2));
    for (std::size_t i = 0; i <= g; ++i)
        if (u[i] > opt.guard_level || u[w - 1 - i] > opt.guard_level)
            throw NumericalFailure("truncation_too_small",
                                   "truncation too small: front within " + std::to_string(opt.guard_sites) +
                                       " sites of the boundary at t = " + std::to_string(t),
                                   t);
}

inline long step_count(double T, double dt, long stride) {
    const long raw = static_cast<long>(std::ceil(T / dt - 1e-9));
    return (raw + stride - 1) / stride * stride;
}

inline void validate_options(const SimulationOptions& opt) {
    if (opt.N < 1) throw InvalidInput("invalid_parameter", "N must be >= 1");
    if (!std::isfinite(opt.T) || opt.T < 0.0) throw InvalidInput("invalid_parameter", "T must be finite and >= 0");
    if (opt.stride < 1) throw InvalidInput("invalid_parameter", "stride must be >= 1");
    if (opt.guard_sites < 0) throw InvalidInput("invalid_parameter", "guard_sites must be >= 0");
}

} // namespace detail

// The horizon is rounded up to a whole number of strides; the last stored time is >= T.
inline Trajectory simulate(const LatticeModel& model, const InitialData& init, const SimulationOptions& opt) {
    detail::validate_options(opt);
    if (init.support_radius() && opt.speed_bound > 0.0 &&
        !(opt.N > *init.support_radius() + static_cast<long>(std::ceil(opt.speed_bound * opt.T))))
        throw InvalidInput("truncation_too_small", "N must exceed M + ceil(speed_bound * T)");
    if (!init.support_radius() && opt.truncation_guard)
        throw InvalidInput("invalid_initial_data", "data without compact support requires truncation_guard = false");

    LatticeStepper stepper(model, init, opt.N, opt.dt);
    Trajectory tr{.model = model};
    tr.N = opt.N;
    tr.dt = stepper.dt();
    tr.stride = opt.stride;
    tr.delay_steps = stepper.delay_steps();
    const long total = detail::step_count(opt.T, tr.dt, opt.stride);
    tr.times.reserve(static_cast<std::size_t>(total / opt.stride + 1));
    tr.values.reserve(tr.times.capacity() * tr.width());

    auto store = [&] {
        tr.times.push_back(stepper.time());
        const auto u = stepper.state();
        tr.values.insert(tr.values.end(), u.begin(), u.end());
    };
    store();
    if (opt.truncation_guard) detail::check_guard(stepper.state(), opt, 0.0);
    while (stepper.steps() < total) {
        stepper.step();
        if (opt.truncation_guard) detail::check_guard(stepper.state(), opt, stepper.time());
        if (stepper.steps() % opt.stride == 0) store();
    }
    tr.history = stepper.recent_history();
    tr.min_value = std::min(stepper.min_seen(), *std::min_element(tr.values.begin(), tr.values.begin() + long(tr.width())));
    tr.max_value = std::max(stepper.max_seen(), *std::max_element(tr.values.begin(), tr.values.begin() + long(tr.width())));
    return tr;
}

inline constexpr double order_slack = 1e-6;

struct OrderViolation {
    long n;
    double t;
    double below;  // value that should be smaller
    double above;
};

struct OrderReport {
    bool ok = true;
    double max_excess = 0.0;  // max(below - above) over compared entries
    std::optional<OrderViolation> first;
    std::size_t frames_checked = 0;
    double tolerance = order_slack;
};

struct SandwichReport {
    OrderReport lower_side;  // lower auxiliary <= u
    OrderReport upper_side;  // u <= upper auxiliary
    double sup_upper_gap = 0.0;  // sup |u - upper|
    bool ok() const { return lower_side.ok && upper_side.ok; }
};

namespace detail {

inline void compare_frame(OrderReport& rep, std::span<const double> below, std::span<const double> above, long N,
                          double t) {
    for (std::size_t i = 0; i < below.size(); ++i) {
        const double excess = below[i] - above[i];
        rep.max_excess = std::max(rep.max_excess, excess);
        if (excess > rep.tolerance && !rep.first) {
            rep.ok = false;
            rep.first = OrderViolation{long(i) - N, t, below[i], above[i]};
        }
    }
    ++rep.frames_checked;
}

inline std::vector<double> copy_of(std::span<const double> s) { return {s.begin(), s.end()}; }

} // namespace detail

// Undelayed auxiliaries with g(u,0) (upper) and g(u,1) (lower) from the same slice u(0).
inline SandwichReport sandwich_check(const Trajectory& traj) {
    const InitialData start = InitialData::profile(detail::copy_of(traj.state(0)));
    LatticeStepper upper(LatticeModel(traj.model.D, 0.0, traj.model.g.with_fixed_delay(0.0)), start, traj.N, traj.dt);
    LatticeStepper lower(LatticeModel(traj.model.D, 0.0, traj.model.g.with_fixed_delay(1.0)), start, traj.N, traj.dt);

    SandwichReport rep;
    for (std::size_t f = 0; f < traj.frames(); ++f) {
        const long target = std::lround(traj.times[f] / traj.dt);
        while (upper.steps() < target) {
            upper.step();
            lower.step();
        }
        const auto u = traj.state(f);
        detail::compare_frame(rep.lower_side, lower.state(), u, traj.N, traj.times[f]);
        detail::compare_frame(rep.upper_side, u, upper.state(), traj.N, traj.times[f]);
        for (std::size_t i = 0; i < u.size(); ++i)
            rep.sup_upper_gap = std::max(rep.sup_upper_gap, std::abs(u[i] - upper.state()[i]));
    }
    return rep;
}

// Ordering of two undelayed solutions started from ordered data.
inline OrderReport comparison_check(const LatticeModel& model, const InitialData& low, const InitialData& high,
                                    const SimulationOptions& opt) {
    detail::validate_options(opt);
    if (model.tau != 0.0) throw InvalidInput("invalid_parameter", "comparison_check runs the undelayed problem (tau = 0)");
    for (long n = -opt.N; n <= opt.N; ++n)
        if (low(n, 0.0) > high(n, 0.0))
            throw InvalidInput("unordered_initial_data", "init_low must not exceed init_high");
    LatticeStepper a(model, low, opt.N, opt.dt), b(model, high, opt.N, opt.dt);
    const long total = detail::step_count(opt.T, a.dt(), opt.stride);
    OrderReport rep;
    detail::compare_frame(rep, a.state(), b.state(), opt.N, 0.0);
    while (a.steps() < total) {
        a.step();
        b.step();
        if (a.steps() % opt.stride == 0) detail::compare_frame(rep, a.state(), b.state(), opt.N, a.time());
    }
    return rep;
}

struct OrderStudy {
    std::vector<double> dts;
    std::vector<double> differences;  // sup |u_dt - u_dt/2| over shared stored frames
    std::vector<double> orders;       // log2 of successive difference ratios
};

// Runs dt, dt/2, ..., dt/2^(levels-1) and compares at shared stored times.
inline OrderStudy integrator_order_study(const LatticeModel& model, const InitialData& init, SimulationOptions opt,
                                         int levels = 3) {
    if (levels < 3) throw InvalidInput("invalid_parameter", "an order study needs at least 3 levels");
    OrderStudy study;
    std::vector<Trajectory> runs;
    const double dt0 = snap_step(model.tau, opt.dt).dt;
    for (int l = 0; l < levels; ++l) {
        SimulationOptions o = opt;
        o.dt = dt0 / double(1L << l);
        o.stride = opt.stride << l;
        runs.push_back(simulate(model, init, o));
        study.dts.push_back(runs.back().dt);
    }
    for (int l = 0; l + 1 < levels; ++l) {
        const auto &a = runs[l], &b = runs[l + 1];
        const std::size_t frames = std::min(a.frames(), b.frames());
        double diff = 0.0;
        for (std::size_t f = 0; f < frames; ++f)
            for (std::size_t i = 0; i < a.width(); ++i)
                diff = std::max(diff, std::abs(a.values[f * a.width() + i] - b.values[f * b.width() + i]));
        study.differences.push_back(diff);
    }
    for (std::size_t l = 0; l + 1 < study.differences.size(); ++l)
        study.orders.push_back(std::log2(study.differences[l] / study.differences[l + 1]));
    return study;
}

} // namespace dlat
