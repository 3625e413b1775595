#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dlat/error.hpp"

namespace dlat {

// D (e^l + e^-l - 2), written as 4 D sinh^2(l/2) to avoid cancellation near 0.
inline double coupling_growth(double lambda, double D) {
    const double s = std::sinh(0.5 * lambda);
    return 4.0 * D * s * s;
}

inline double delta(double lambda, double c, double D, double rate) {
    return coupling_growth(lambda, D) - c * lambda + rate;
}

// Speed quotient (D (e^l + e^-l - 2) + rate) / l; its infimum over l > 0 is c*.
inline double speed_quotient(double lambda, double D, double rate) {
    return (coupling_growth(lambda, D) + rate) / lambda;
}

// Stationarity of the speed quotient; strictly increasing in lambda.
inline double stationarity(double lambda, double D, double rate) {
    return 2.0 * D * lambda * std::sinh(lambda) - coupling_growth(lambda, D) - rate;
}

struct CharacteristicResult {
    double c_star;
    double lambda_star;
    double linearization_rate;
    double D;
};

struct RootPair {
    double c;
    double lambda1;
    double lambda2;
    bool double_root;
};

inline constexpr double critical_band = 1e-9;

namespace detail {

// Bisection to machine resolution on a sign-changing bracket, f(lo) and f(hi) of opposite sign.
template <class F>
double bisect(F&& f, double lo, double hi) {
    const bool lo_negative = f(lo) < 0.0;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        ((fm < 0.0) == lo_negative ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

inline CharacteristicResult compute_cstar(double D, double rate) {
    if (!std::isfinite(D) || D <= 0.0) throw InvalidInput("invalid_parameter", "D must be finite and > 0");
    if (!std::isfinite(rate) || rate <= 0.0)
        throw InvalidInput("nonpositive_rate", "linearization rate must be positive");
    auto S = [&](double l) { return stationarity(l, D, rate); };
    double lo = 0.0, hi = 1.0;
    while (S(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw NumericalFailure("bracket_failed", "no bracket for the speed minimizer");
    }
    const double ls = detail::bisect(S, lo, hi);
    return {speed_quotient(ls, D, rate), ls, rate, D};
}

inline RootPair characteristic_roots(double c, const CharacteristicResult& res) {
    if (!std::isfinite(c) || c <= 0.0) throw InvalidInput("invalid_parameter", "speed c must be finite and > 0");
    if (std::abs(c - res.c_star) <= critical_band) return {c, res.lambda_star, res.lambda_star, true};
    if (c < res.c_star)
        throw NumericalFailure("no_real_roots", "no real roots below critical speed", c - res.c_star);
    auto f = [&](double l) { return delta(l, c, res.D, res.linearization_rate); };
    const double l1 = detail::bisect(f, 0.0, res.lambda_star);
    double hi = 2.0 * res.lambda_star;
    while (f(hi) <= 0.0) hi *= 2.0;
    const double l2 = detail::bisect(f, res.lambda_star, hi);
    return {c, l1, l2, false};
}

// (lambda, delta) samples on (0, lambda_max] for plotting.
inline std::vector<std::pair<double, double>> delta_curve(double c, double D, double rate, double lambda_max,
                                                          int samples) {
    if (samples < 2 || !(lambda_max > 0.0))
        throw InvalidInput("invalid_parameter", "delta curve needs samples >= 2 and lambda_max > 0");
    std::vector<std::pair<double, double>> out;
    out.reserve(samples);
    for (int i = 1; i <= samples; ++i) {
        const double l = lambda_max * i / samples;
        out.emplace_back(l, delta(l, c, D, rate));
    }
    return out;
}

} // namespace dlat
