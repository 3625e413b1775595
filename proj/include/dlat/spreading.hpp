#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dlat/error.hpp"
#include "dlat/simulator.hpp"

namespace dlat {

struct FrontTrace {
    double level = 0.0;
    std::vector<double> times;
    std::vector<double> right_positions;
    std::vector<double> left_positions;

    bool empty() const { return times.empty(); }
};

// Outermost level crossings per stored frame, linearly interpolated between sites.
inline FrontTrace track_front(const Trajectory& traj, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidInput("invalid_parameter", "front level must lie in (0,1)");
    FrontTrace tr;
    tr.level = level;
    const long N = traj.N;
    for (std::size_t f = 0; f < traj.frames(); ++f) {
        const auto u = traj.state(f);
        const std::size_t w = u.size();
        std::size_t hi = w, lo = w;
        for (std::size_t i = w; i-- > 0;)
            if (u[i] >= level) { hi = i; break; }
        for (std::size_t i = 0; i < w; ++i)
            if (u[i] >= level) { lo = i; break; }
        if (hi == w || hi + 1 >= w || lo == 0) continue;
        const double right = double(long(hi) - N) + (u[hi] - level) / (u[hi] - u[hi + 1]);
        const double left = double(long(lo) - N) - (u[lo] - level) / (u[lo] - u[lo - 1]);
        tr.times.push_back(traj.times[f]);
        tr.right_positions.push_back(right);
        tr.left_positions.push_back(left);
    }
    return tr;
}

struct SpeedEstimate {
    double speed = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::size_t points = 0;

    bool converged() const { return r_squared >= 0.99; }
};

// Least-squares line through (t, right position) after dropping the leading discard_fraction of samples.
inline SpeedEstimate estimate_speed(const FrontTrace& trace, double discard_fraction = 0.5) {
    if (!(discard_fraction >= 0.0 && discard_fraction < 1.0))
        throw InvalidInput("invalid_parameter", "discard_fraction must lie in [0,1)");
    const std::size_t n = trace.times.size();
    const auto skip = static_cast<std::size_t>(std::floor(discard_fraction * double(n)));
    if (n - skip < 10) throw NumericalFailure("insufficient_data", "insufficient data: fewer than 10 retained front positions");

    const std::size_t m = n - skip;
    double mt = 0.0, mx = 0.0;
    for (std::size_t i = skip; i < n; ++i) {
        mt += trace.times[i];
        mx += trace.right_positions[i];
    }
    mt /= double(m);
    mx /= double(m);
    double stt = 0.0, stx = 0.0, sxx = 0.0;
    for (std::size_t i = skip; i < n; ++i) {
        const double dt = trace.times[i] - mt, dx = trace.right_positions[i] - mx;
        stt += dt * dt;
        stx += dt * dx;
        sxx += dx * dx;
    }
    if (stt == 0.0) throw NumericalFailure("insufficient_data", "insufficient data: retained samples share one time");
    SpeedEstimate est;
    est.speed = stx / stt;
    est.intercept = mx - est.speed * mt;
    double ssr = 0.0;
    for (std::size_t i = skip; i < n; ++i) {
        const double e = trace.right_positions[i] - (est.intercept + est.speed * trace.times[i]);
        ssr += e * e;
    }
    est.r_squared = sxx > 0.0 ? std::max(0.0, 1.0 - ssr / sxx) : 1.0;
    est.t_lo = trace.times[skip];
    est.t_hi = trace.times.back();
    est.points = m;
    return est;
}

struct ConeReport {
    double T = 0.0;
    double inner_radius = 0.0;
    double outer_radius = 0.0;
    double inner_deviation = 0.0;  // max |u_n(T) - E| over |n| <= inner_radius
    double outer_max = 0.0;        // max u_n(T) over |n| >= outer_radius
    bool inner_ok = false;
    bool outer_ok = false;
    bool outer_vacuous = false;    // no lattice site lies beyond the outer radius
    double inner_target = 1e-2;
    double outer_target = 1e-3;
};

inline ConeReport cone_checks(const Trajectory& traj, double c_star, double E, double inner_factor = 0.5,
                              double outer_factor = 1.2) {
    if (traj.frames() == 0) throw InvalidInput("invalid_parameter", "empty trajectory");
    if (!(0.0 < inner_factor && inner_factor < 1.0 && outer_factor > 1.0))
        throw InvalidInput("invalid_parameter", "cone factors need 0 < inner < 1 < outer");
    ConeReport rep;
    rep.T = traj.times.back();
    if (!(0.8 * c_star * rep.T >= 20.0))
        throw InvalidInput("horizon_too_short", "cone checks need 0.8 * c_star * T >= 20 sites");
    rep.inner_radius = inner_factor * c_star * rep.T;
    rep.outer_radius = outer_factor * c_star * rep.T;
    const auto u = traj.state(traj.frames() - 1);
    rep.outer_vacuous = true;
    for (long n = -traj.N; n <= traj.N; ++n) {
        const double x = u[static_cast<std::size_t>(n + traj.N)];
        const double r = std::abs(double(n));
        if (r <= rep.inner_radius) rep.inner_deviation = std::max(rep.inner_deviation, std::abs(x - E));
        if (r >= rep.outer_radius) {
            rep.outer_vacuous = false;
            rep.outer_max = std::max(rep.outer_max, x);
        }
    }
    rep.inner_ok = rep.inner_deviation <= rep.inner_target;
    rep.outer_ok = rep.outer_max <= rep.outer_target;
    return rep;
}

} // namespace dlat
