#include <doctest.h>

#include <cmath>

#include "tailadrf/dgp.hpp"
#include "tailadrf/pdhte.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"
#include "test_util.hpp"

using namespace tailadrf;

TEST_SUITE("dgp") {

TEST_CASE("structural theta anchors") {
    CHECK(structural_theta(0.0) == 0.0);
    CHECK(structural_theta(1.0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(structural_theta(-1.0) == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("generate is deterministic") {
    const DGPSpec spec{DgpName::sinusoidal_pareto, 0.1, 400, 99};
    const Sample a = generate(spec);
    const Sample b = generate(spec);
    CHECK(a.x == b.x);
    CHECK(a.t == b.t);
    CHECK(a.y == b.y);
}

TEST_CASE("unknown name throws") {
    CHECK_THROWS(dgp_from_string("not_a_dgp"));
}

TEST_CASE("name round trip") {
    for (const auto* name : {"clean", "sinusoidal_pareto", "sinusoidal_asymmetric",
                             "sinusoidal_heavytail", "sinusoidal_two_paretos",
                             "regime_switch", "pareto_plus_gaussian",
                             "heteroskedastic", "t_localised", "multi_context",
                             "confounded"})
        CHECK(dgp_to_string(dgp_from_string(name)) == name);
}

TEST_CASE("clean noise has unit scale") {
    const Sample s = generate({DgpName::clean, 0.0, 20000, 5});
    std::vector<double> eps(s.n);
    for (std::size_t i = 0; i < s.n; ++i)
        eps[i] = s.y[i] - structural_theta(s.t[i]) - 0.5 * s.x_at(i, 1);
    CHECK(vec_mean(eps) == doctest::Approx(0.0).epsilon(0.05));
    CHECK(vec_sd(eps) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("confounded treatment tracks x0") {
    const Sample s = generate({DgpName::confounded, 0.1, 6000, 21});
    std::vector<double> x0(s.n);
    for (std::size_t i = 0; i < s.n; ++i) x0[i] = s.x_at(i, 0);
    CHECK(correlation(s.t, x0) > 0.3);
}

TEST_CASE("panel treatment is independent of covariates") {
    const Sample s = generate({DgpName::sinusoidal_pareto, 0.1, 50000, 3});
    for (std::size_t j = 0; j < s.d; ++j) {
        std::vector<double> xj(s.n);
        for (std::size_t i = 0; i < s.n; ++i) xj[i] = s.x_at(i, j);
        CHECK(std::abs(correlation(s.t, xj)) < 0.05);
    }
}

TEST_CASE("pareto contamination has the intended tail index") {
    Rng rng(2024);
    std::vector<double> draws(100000);
    for (auto& d : draws) d = rng.pareto(1.5, 1.0);
    const auto hill = kw_hill({draws, test_util::ones(draws.size())}, 0.1);
    REQUIRE(hill.has_value());
    CHECK(*hill == doctest::Approx(2.0 / 3.0).epsilon(0.15));
    CHECK(std::abs(*hill - 2.0 / 3.0) < 0.1);
}

TEST_CASE("oracle matches the structural curve on clean data") {
    const DGPSpec spec{DgpName::clean, 0.0, 1000, 8};
    const std::vector<double> grid{-1.5, -0.5, 0.5, 1.5};
    const OracleCurves oc = oracle_curves(spec, grid, 0.05, 40000, 12);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(oc.theta[k] == doctest::Approx(structural_theta(grid[k])).epsilon(0.05));
        CHECK(oc.q_alpha[k] > oc.theta[k]);   // upper tail on symmetric bulk
        CHECK(oc.s_alpha[k] >= oc.q_alpha[k]);
    }
}

TEST_CASE("two-pareto oracle exposes the piecewise tail truth") {
    const DGPSpec spec{DgpName::sinusoidal_two_paretos, 0.1, 1000, 8};
    const std::vector<double> grid{-1.0, 1.0};
    const OracleCurves oc = oracle_curves(spec, grid, 0.05, 2000, 12);
    CHECK(oc.xi_true[0] == doctest::Approx(0.667).epsilon(1e-3));
    CHECK(oc.xi_true[1] == doctest::Approx(0.333).epsilon(1e-3));
}

TEST_CASE("oracle rejects alpha at or above one half") {
    const DGPSpec spec{DgpName::clean, 0.0, 1000, 8};
    const std::vector<double> grid{0.0};
    CHECK_THROWS(oracle_curves(spec, grid, 0.5, 2000, 1));
    CHECK_THROWS(oracle_curves(spec, grid, 0.05, 500, 1));
}

TEST_CASE("t_localised truth is heavy only near t = 1") {
    CHECK(dgp_true_xi(DgpName::t_localised, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK(dgp_true_xi(DgpName::t_localised, 0.0) == 0.0);
    CHECK(dgp_true_xi(DgpName::sinusoidal_two_paretos, -0.5) == doctest::Approx(2.0 / 3.0));
    CHECK(dgp_true_xi(DgpName::sinusoidal_two_paretos, 0.5) == doctest::Approx(1.0 / 3.0));
}

}  // TEST_SUITE
