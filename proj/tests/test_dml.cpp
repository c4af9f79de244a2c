#include <doctest.h>

#include <cmath>
#include <set>

#include "tailadrf/dgp.hpp"
#include "tailadrf/dml.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"
#include "test_util.hpp"

using namespace tailadrf;

namespace {

Sample constant_signal_sample(std::size_t n, double c, std::uint64_t seed) {
    Rng rng(seed);
    Sample s;
    s.n = n;
    s.d = 5;
    s.x.resize(n * 5);
    s.t.resize(n);
    s.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 5; ++j) s.x[i * 5 + j] = rng.normal();
        s.t[i] = -2.0 + 4.0 * rng.uniform();
        s.y[i] = c + rng.normal();
    }
    return s;
}

}  // namespace

TEST_SUITE("dml") {

TEST_CASE("fold assignment partitions the sample") {
    const Sample s = constant_signal_sample(200, 0.0, 1);
    const NuisanceFit fit = crossfit_nuisances(s, 3, 7);
    REQUIRE(fit.fold_id.size() == 200);
    int counts[3] = {0, 0, 0};
    for (int f : fit.fold_id) {
        REQUIRE(f >= 0);
        REQUIRE(f < 3);
        ++counts[f];
    }
    for (int c : counts) CHECK(std::abs(c - 200 / 3) <= 1);
}

TEST_CASE("crossfit rejects tiny samples") {
    const Sample s = constant_signal_sample(25, 0.0, 1);
    CHECK_THROWS(crossfit_nuisances(s, 3, 7));
    CHECK_THROWS(crossfit_nuisances(s, 1, 7));
}

TEST_CASE("constant outcome recovers the constant") {
    const Sample s = constant_signal_sample(1200, 3.0, 5);
    const NuisanceFit fit = crossfit_nuisances(s, 3, 7);
    CHECK(vec_mean(fit.g_hat) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("treatment nuisance is nearly constant under independence") {
    const Sample s = generate({DgpName::sinusoidal_pareto, 0.0, 5000, 17});
    const NuisanceFit fit = crossfit_nuisances(s, 3, 7);
    CHECK(vec_sd(fit.m_hat) / vec_sd(s.t) < 0.35);
}

TEST_CASE("exact linear data is reproduced by every loss") {
    Rng rng(3);
    std::vector<double> t(300), r(300);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = -1.0 + 2.0 * rng.uniform();
        r[i] = 2.0 + 3.0 * t[i];
    }
    for (LossKind kind : {LossKind::standard_l2, LossKind::huber, LossKind::welsch}) {
        LossSpec loss;
        loss.kind = kind;
        const auto fit = local_linear_m_fit(r, t, 0.4, 0.3, loss);
        CHECK(fit.intercept == doctest::Approx(2.0 + 3.0 * 0.4).epsilon(1e-8));
    }
}

TEST_CASE("welsch weight values") {
    LossSpec welsch;
    welsch.kind = LossKind::welsch;
    CHECK(rho_weight(welsch, 0.0) == 1.0);
    CHECK(rho_weight(welsch, std::sqrt(1.0 / welsch.welsch_gamma)) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    LossSpec huber;
    huber.kind = LossKind::huber;
    CHECK(rho_weight(huber, 1.0) == 1.0);
    CHECK(rho_weight(huber, 2.7) == doctest::Approx(1.35 / 2.7).epsilon(1e-12));
}

TEST_CASE("welsch resists symmetric contamination better than least squares") {
    LossSpec l2;
    l2.kind = LossKind::standard_l2;
    LossSpec welsch;
    welsch.kind = LossKind::welsch;
    const double truth = 1.0;
    double err_l2 = 0.0, err_w = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(29 * seed);
        const std::size_t n = 3000;
        std::vector<double> t(n), r(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = -1.0 + 2.0 * rng.uniform();
            double eps = rng.normal();
            if (rng.bernoulli(0.15)) eps = rng.random_sign() * rng.pareto(1.5, 1.0);
            r[i] = 1.0 + 0.5 * t[i] + eps;
        }
        err_l2 += std::abs(local_linear_m_fit(r, t, 0.0, 0.25, l2).intercept - truth);
        err_w += std::abs(local_linear_m_fit(r, t, 0.0, 0.25, welsch).intercept - truth);
    }
    CHECK(err_w < err_l2);
}

TEST_CASE("location equivariance for every loss") {
    Rng rng(31);
    const std::size_t n = 800;
    std::vector<double> t(n), r(n), rc(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.normal();
        r[i] = std::sin(t[i]) + rng.normal() * 0.5;
        rc[i] = r[i] + 4.25;
    }
    for (LossKind kind : {LossKind::standard_l2, LossKind::huber, LossKind::welsch}) {
        LossSpec loss;
        loss.kind = kind;
        const double a = local_linear_m_fit(r, t, 0.2, 0.4, loss).intercept;
        const double b = local_linear_m_fit(rc, t, 0.2, 0.4, loss).intercept;
        CHECK(b - a == doctest::Approx(4.25).epsilon(1e-7));
    }
}

TEST_CASE("huber with a huge clip equals least squares") {
    Rng rng(37);
    const std::size_t n = 500;
    std::vector<double> t(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.normal();
        r[i] = 0.3 * t[i] + rng.normal();
    }
    LossSpec l2;
    l2.kind = LossKind::standard_l2;
    LossSpec huber;
    huber.kind = LossKind::huber;
    huber.huber_epsilon = 1e6;
    const double a = local_linear_m_fit(r, t, 0.1, 0.5, l2).intercept;
    const double b = local_linear_m_fit(r, t, 0.1, 0.5, huber).intercept;
    CHECK(std::abs(a - b) / std::max(1.0, std::abs(a)) < 1e-6);
}

TEST_CASE("welsch IRLS objective never increases") {
    Rng rng(41);
    const std::size_t n = 1500;
    std::vector<double> t(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = -1.0 + 2.0 * rng.uniform();
        double eps = rng.normal();
        if (rng.bernoulli(0.2)) eps = rng.random_sign() * rng.pareto(1.5, 1.0);
        r[i] = std::cos(t[i]) + eps;
    }
    LossSpec welsch;
    welsch.kind = LossKind::welsch;
    IrlsTrace trace;
    local_linear_m_fit(r, t, 0.3, 0.3, welsch, &trace);
    REQUIRE(!trace.before.empty());
    for (std::size_t i = 0; i < trace.before.size(); ++i)
        CHECK(trace.after[i] <= trace.before[i] + 1e-9 * std::abs(trace.before[i]));
}

TEST_CASE("singular band throws") {
    std::vector<double> t(50, 1.0), r(50, 0.5);
    LossSpec l2;
    l2.kind = LossKind::standard_l2;
    CHECK_THROWS(local_linear_m_fit(r, t, 1.0, 0.2, l2));
}

TEST_CASE("welsch equals least squares on residual-free data") {
    Rng rng(47);
    const std::size_t n = 600;
    std::vector<double> t(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = -2.0 + 4.0 * rng.uniform();
        r[i] = 0.7 - 1.3 * t[i];  // the local-linear model fits this exactly
    }
    const std::vector<double> grid = linspace(-1.5, 1.5, 7);
    LossSpec l2;
    l2.kind = LossKind::standard_l2;
    LossSpec welsch;
    welsch.kind = LossKind::welsch;
    const ADRFCurve a = adrf_from_residuals(r, t, grid, 0.3, l2, 0.0);
    const ADRFCurve b = adrf_from_residuals(r, t, grid, 0.3, welsch, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(a.theta[k] == doctest::Approx(b.theta[k]).epsilon(1e-9));
}

TEST_CASE("clean accuracy of the least-squares core") {
    const Sample s = generate({DgpName::clean, 0.0, 4000, 2});
    const std::vector<double> grid = linspace(-2.0, 2.0, 25);
    LossSpec l2;
    l2.kind = LossKind::standard_l2;
    const ADRFCurve c = estimate_adrf(s, grid, l2, 3, 2);
    double mae = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        mae += std::abs(c.theta[k] - structural_theta(grid[k]));
    mae /= static_cast<double>(grid.size());
    CHECK(mae < 0.15);
}

}  // TEST_SUITE
