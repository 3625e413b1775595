#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dlat/model.hpp"

using namespace dlat;
#include "tight_approx.hpp"

TEST_CASE("logistic with a = 0.5 passes every screen", "[model]") {
    const auto rep = check_hypotheses(Nonlinearity::logistic(1.0, 0.5), 64, 1e-10);
    CHECK(rep.all_ok());
    REQUIRE(rep.E);
    CHECK(*rep.E == Approx(2.0 / 3.0).margin(1e-10));
    CHECK(rep.violations.empty());
}

TEST_CASE("logistic with a = 1 fails H3 at g(0,1) = 0", "[model]") {
    const auto rep = check_hypotheses(Nonlinearity::logistic(1.0, 1.0), 64, 1e-10);
    CHECK_FALSE(rep.h3_ok);
    bool found = false;
    for (const auto& v : rep.violations)
        found = found || (v.hypothesis == "H3" && v.u == 0.0 && v.v == 1.0 && v.value == 0.0);
    CHECK(found);
}

TEST_CASE("g increasing in v fails H2 with a witness on the v-axis", "[model]") {
    const auto g = Nonlinearity::custom([](double u, double v) { return 1.0 - u + v; }, 1.0);
    const auto rep = check_hypotheses(g, 32, 1e-10);
    CHECK_FALSE(rep.h2_ok);
    REQUIRE_FALSE(rep.violations.empty());
    bool on_axis = false;
    for (const auto& v : rep.violations) on_axis = on_axis || (v.hypothesis == "H2" && v.u == 0.0);
    CHECK(on_axis);
}

TEST_CASE("every false flag carries a witness", "[model]") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ra(0.0, 3.0);
    for (int k = 0; k < 20; ++k) {
        const auto g = Nonlinearity::logistic(0.5 + ra(rng), ra(rng));
        const auto rep = check_hypotheses(g, 32, 1e-10);
        for (auto [ok, id] : {std::pair{rep.h1_ok, "H1"}, {rep.h2_ok, "H2"}, {rep.h3_ok, "H3"}, {rep.h4_ok, "H4"}}) {
            if (ok) continue;
            bool has = false;
            for (const auto& v : rep.violations) has = has || v.hypothesis == id;
            CHECK(has);
        }
        if (rep.h3_ok) {
            REQUIRE(rep.E);
            CHECK(std::abs(g(*rep.E, *rep.E)) <= 1e-10);
        }
    }
}

TEST_CASE("equilibrium", "[model]") {
    CHECK(equilibrium(Nonlinearity::logistic(1.0, 0.5), 1e-12) == Approx(2.0 / 3.0).margin(1e-12));
    CHECK_THROWS_AS(equilibrium(Nonlinearity::logistic(2.0, 0.0), 1e-10), NumericalFailure);

    const auto g = Nonlinearity::custom([](double u, double v) { return 1.0 - u * u - v * v; }, 2.0);
    const double e = equilibrium(g, 1e-12);
    CHECK(e == Approx(std::sqrt(0.5)).margin(1e-12));
    CHECK(std::abs(g(e, e)) <= 1e-12);
}

TEST_CASE("equilibrium does not move under grid refinement", "[model]") {
    const auto g = Nonlinearity::logistic(1.3, 0.7);
    const auto a = check_hypotheses(g, 32, 1e-10), b = check_hypotheses(g, 64, 1e-10);
    REQUIRE(a.E);
    REQUIRE(b.E);
    CHECK(std::abs(*a.E - *b.E) <= 1e-10);
}

TEST_CASE("logistic screen matches closed-form conditions", "[model][property]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> rr(0.05, 5.0), lower(0.01, 0.99), upper(1.1, 3.0);
    for (int k = 0; k < 40; ++k) {
        const double r = rr(rng), a = k % 2 ? lower(rng) : upper(rng);
        const auto rep = check_hypotheses(Nonlinearity::logistic(r, a), 64, 1e-10);
        CHECK(rep.h1_ok);
        CHECK(rep.h2_ok);
        CHECK(rep.h3_ok == (a < 1.0));
        CHECK(rep.h4_ok == (a < 1.0));
        if (a < 1.0) CHECK(*rep.E == Approx(1.0 / (1.0 + a)).margin(1e-10));
    }
}

TEST_CASE("H2-passing nonlinearities are monotone on random pairs", "[model][property]") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto table = Nonlinearity::table({0.0, 0.5, 1.0}, {0.0, 1.0}, {1.0, 0.6, 0.5, 0.1, 0.0, -0.4});
    for (const auto& g : {Nonlinearity::logistic(2.0, 0.3), table}) {
        REQUIRE(check_hypotheses(g, 32, 1e-10).h2_ok);
        for (int k = 0; k < 500; ++k) {
            double u1 = unit(rng), u2 = unit(rng), v1 = unit(rng), v2 = unit(rng), v = unit(rng);
            if (u1 > u2) std::swap(u1, u2);
            if (v1 > v2) std::swap(v1, v2);
            CHECK(g(u2, v) <= g(u1, v));
            CHECK(g(v, v2) <= g(v, v1));
        }
    }
}

TEST_CASE("tabulated nonlinearity", "[model]") {
    // logistic is bilinear, so its table on the corners reproduces it exactly
    const auto ref = Nonlinearity::logistic(1.5, 0.4);
    const auto t = Nonlinearity::table({0.0, 1.0}, {0.0, 1.0}, {ref(0, 0), ref(0, 1), ref(1, 0), ref(1, 1)});
    for (double u : {0.0, 0.3, 0.9, 10.0})
        for (double v : {0.0, 0.25, 1.0}) CHECK(t(u, v) == Approx(ref(u, v)).margin(1e-14));
    CHECK(t.lipschitz_bound() == Approx(1.5));
    CHECK(check_hypotheses(t, 32, 1e-10).all_ok());
    CHECK_THROWS_AS(Nonlinearity::table({0.0, 0.0}, {0.0, 1.0}, {1, 1, 1, 1}), InvalidInput);
    CHECK_THROWS_AS(Nonlinearity::table({0.0, 1.0}, {0.0, 1.0}, {1, 1, 1}), InvalidInput);
}

TEST_CASE("custom nonlinearity validation", "[model]") {
    CHECK_THROWS_AS(Nonlinearity::custom([](double u, double) { return 1.0 - 5.0 * u; }, 1.0), InvalidInput);
    CHECK_THROWS_AS(Nonlinearity::custom([](double u, double) { return u > 0.5 ? NAN : 1.0; }, 1.0), InvalidInput);
    CHECK_NOTHROW(Nonlinearity::custom([](double u, double) { return 1.0 - 5.0 * u; }, 5.0));
}

TEST_CASE("evaluation is deterministic", "[model]") {
    const auto g = Nonlinearity::logistic(1.7, 0.45);
    for (double u : {0.1, 0.7})
        for (double v : {0.2, 0.9}) CHECK(g(u, v) == g(u, v));
}

TEST_CASE("monotonicity shift", "[model]") {
    CHECK(Nonlinearity::logistic(1.0, 0.5).monotonicity_shift() == Approx(2.5));
    const auto g = Nonlinearity::custom([](double u, double v) { return 1.0 - u * u - 0.5 * v; }, 2.0);
    const double d = g.monotonicity_shift();
    for (double v : {0.0, 0.5, 1.0}) {
        double prev = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double s = i / 1000.0, x = d * s + s * g(s, v);
            CHECK(x >= prev);
            prev = x;
        }
    }
}

TEST_CASE("fixed delay argument", "[model]") {
    const auto g = Nonlinearity::logistic(1.0, 0.5);
    const auto up = g.with_fixed_delay(0.0), lo = g.with_fixed_delay(1.0);
    CHECK(up(0.3, 0.9) == Approx(g(0.3, 0.0)));
    CHECK(lo(0.3, 0.0) == Approx(g(0.3, 1.0)));
    const auto c = Nonlinearity::custom([](double u, double v) { return 1.0 - u - v; }, 1.0).with_fixed_delay(0.25);
    CHECK(c(0.5, 0.9) == Approx(0.25));
}

TEST_CASE("model parameter validation", "[model]") {
    CHECK_THROWS_AS(LatticeModel(0.0, 1.0, Nonlinearity::logistic(1, 0.5)), InvalidInput);
    CHECK_THROWS_AS(LatticeModel(1.0, -1.0, Nonlinearity::logistic(1, 0.5)), InvalidInput);
    CHECK_THROWS_AS(Nonlinearity::logistic(0.0, 0.5), InvalidInput);
    CHECK_THROWS_AS(check_hypotheses(Nonlinearity::logistic(1, 0.5), 8, 1e-10), InvalidInput);
}
