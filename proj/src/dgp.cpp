#include "tailadrf/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

constexpr std::uint64_t kStreamGenerate = 11;
constexpr std::uint64_t kStreamOracle = 13;

constexpr double kParetoHeavy = 1.5;  // contamination shape, xi = 2/3
constexpr double kParetoLight = 3.0;  // xi = 1/3

// Covariate effect in the outcome equation.
double g_of_x(const double* xrow) { return 0.5 * xrow[1]; }

// Outcome noise given treatment and covariates. Draw order is fixed:
// one contamination uniform first, then whatever the branch needs.
double draw_eps(DgpName name, double p, double t, const double* xrow, Rng& rng) {
    const double u = rng.uniform();
    switch (name) {
        case DgpName::clean:
            return rng.normal();
        case DgpName::sinusoidal_pareto:
            if (u < p) return rng.random_sign() * rng.pareto(kParetoHeavy, 1.0);
            return rng.normal();
        case DgpName::sinusoidal_asymmetric:
            if (u < p) return 6.0 + rng.normal();
            return rng.normal();
        case DgpName::sinusoidal_heavytail:
            if (u < p) return rng.student_t2();
            return rng.normal();
        case DgpName::sinusoidal_two_paretos:
            if (u < p) {
                // scale 2 keeps the contaminated draws clear of the bulk, so
                // the lighter Pareto-3 side stays identifiable in the band
                const double a = t < 0.0 ? kParetoHeavy : kParetoLight;
                return rng.random_sign() * rng.pareto(a, 2.0);
            }
            return rng.normal();
        case DgpName::regime_switch:
            if (xrow[2] > 0.0 && u < std::min(2.0 * p, 1.0))
                return rng.random_sign() * rng.pareto(kParetoHeavy, 1.0);
            return rng.normal();
        case DgpName::pareto_plus_gaussian:
            if (u < p) {
                if (rng.bernoulli(0.5))
                    return rng.random_sign() * rng.pareto(kParetoHeavy, 1.0);
                return 5.0 * rng.normal();
            }
            return rng.normal();
        case DgpName::heteroskedastic:
            return (1.0 + std::abs(t)) * rng.normal();
        case DgpName::t_localised:
            if (std::abs(t - 1.0) < 0.3 && u < p)
                return rng.random_sign() * rng.pareto(kParetoHeavy, 1.0);
            return rng.normal();
        case DgpName::multi_context:
            if (u < p) {
                const double a = xrow[1] > 0.0 ? kParetoHeavy : kParetoLight;
                return rng.random_sign() * rng.pareto(a, 1.0);
            }
            return rng.normal();
        case DgpName::confounded:
            if (xrow[0] < 0.0 && u < p)
                return rng.random_sign() * rng.pareto(kParetoHeavy, 2.0);
            return rng.normal();
    }
    throw std::invalid_argument("draw_eps: unknown DGP");
}

}  // namespace

DgpName dgp_from_string(const std::string& name) {
    if (name == "clean") return DgpName::clean;
    if (name == "sinusoidal_pareto") return DgpName::sinusoidal_pareto;
    if (name == "sinusoidal_asymmetric") return DgpName::sinusoidal_asymmetric;
    if (name == "sinusoidal_heavytail") return DgpName::sinusoidal_heavytail;
    if (name == "sinusoidal_two_paretos") return DgpName::sinusoidal_two_paretos;
    if (name == "regime_switch") return DgpName::regime_switch;
    if (name == "pareto_plus_gaussian") return DgpName::pareto_plus_gaussian;
    if (name == "heteroskedastic") return DgpName::heteroskedastic;
    if (name == "t_localised") return DgpName::t_localised;
    if (name == "multi_context") return DgpName::multi_context;
    if (name == "confounded") return DgpName::confounded;
    throw std::invalid_argument("unknown DGP name: " + name);
}

std::string dgp_to_string(DgpName name) {
    switch (name) {
        case DgpName::clean: return "clean";
        case DgpName::sinusoidal_pareto: return "sinusoidal_pareto";
        case DgpName::sinusoidal_asymmetric: return "sinusoidal_asymmetric";
        case DgpName::sinusoidal_heavytail: return "sinusoidal_heavytail";
        case DgpName::sinusoidal_two_paretos: return "sinusoidal_two_paretos";
        case DgpName::regime_switch: return "regime_switch";
        case DgpName::pareto_plus_gaussian: return "pareto_plus_gaussian";
        case DgpName::heteroskedastic: return "heteroskedastic";
        case DgpName::t_localised: return "t_localised";
        case DgpName::multi_context: return "multi_context";
        case DgpName::confounded: return "confounded";
    }
    return "unknown";
}

double structural_theta(double t) {
    return std::sin(std::numbers::pi * t / 2.0) + t / 2.0;
}

Sample generate(const DGPSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");
    const std::size_t n = static_cast<std::size_t>(spec.n);
    constexpr std::size_t d = 5;

    Sample s;
    s.n = n;
    s.d = d;
    s.x.resize(n * d);
    s.t.resize(n);
    s.y.resize(n);

    Rng rng(derive_seed(spec.seed, kStreamGenerate));
    for (std::size_t i = 0; i < n; ++i) {
        double* xrow = &s.x[i * d];
        for (std::size_t j = 0; j < d; ++j) xrow[j] = rng.normal();
        double t;
        if (spec.name == DgpName::confounded) {
            t = 0.6 * xrow[0] + rng.normal();
        } else {
            t = -2.0 + 4.0 * rng.uniform();
        }
        s.t[i] = t;
        const double eps = draw_eps(spec.name, spec.contamination_p, t, xrow, rng);
        s.y[i] = structural_theta(t) + g_of_x(xrow) + eps;
    }
    return s;
}

double dgp_true_xi(DgpName name, double t) {
    switch (name) {
        case DgpName::clean:
        case DgpName::sinusoidal_asymmetric:
        case DgpName::heteroskedastic:
            return 0.0;
        case DgpName::sinusoidal_pareto:
        case DgpName::regime_switch:
        case DgpName::pareto_plus_gaussian:
        case DgpName::multi_context:
        case DgpName::confounded:
            return 1.0 / kParetoHeavy;
        case DgpName::sinusoidal_heavytail:
            return 0.5;
        case DgpName::sinusoidal_two_paretos:
            // Max-stable at the boundary: a band at t=0 mixes both sides.
            return t <= 0.0 ? 1.0 / kParetoHeavy : 1.0 / kParetoLight;
        case DgpName::t_localised:
            return std::abs(t - 1.0) < 0.3 ? 1.0 / kParetoHeavy : 0.0;
    }
    return 0.0;
}

std::vector<OracleCurves> oracle_curves_multi(const DGPSpec& spec,
                                              std::span<const double> grid,
                                              std::span<const double> alphas,
                                              int n_oracle, std::uint64_t seed) {
    for (double a : alphas)
        if (!(a > 0.0 && a < 0.5))
            throw std::invalid_argument("oracle_curves: alpha must be in (0, 0.5)");
    if (n_oracle < 1000)
        throw std::invalid_argument("oracle_curves: n_oracle must be >= 1000");

    std::vector<OracleCurves> out(alphas.size());
    for (auto& oc : out) {
        oc.grid.assign(grid.begin(), grid.end());
        oc.theta.resize(grid.size());
        oc.q_alpha.resize(grid.size());
        oc.s_alpha.resize(grid.size());
        oc.xi_true.resize(grid.size());
    }

    constexpr std::size_t d = 5;
    std::vector<double> y(static_cast<std::size_t>(n_oracle));
    double xrow[d];

    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t0 = grid[k];
        Rng rng(derive_seed(seed, kStreamOracle + 31 * k));
        for (int i = 0; i < n_oracle; ++i) {
            for (std::size_t j = 0; j < d; ++j) xrow[j] = rng.normal();
            if (spec.name == DgpName::confounded) rng.normal();  // skipped T noise
            const double eps =
                draw_eps(spec.name, spec.contamination_p, t0, xrow, rng);
            y[static_cast<std::size_t>(i)] =
                structural_theta(t0) + g_of_x(xrow) + eps;
        }
        const double theta_hat = vec_mean(y);
        std::sort(y.begin(), y.end());
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            const double q = quantile_sorted(y, 1.0 - alphas[a]);
            double s = 0.0;
            std::size_t cnt = 0;
            for (auto it = y.rbegin(); it != y.rend() && *it > q; ++it) {
                s += *it;
                ++cnt;
            }
            out[a].theta[k] = theta_hat;
            out[a].q_alpha[k] = q;
            out[a].s_alpha[k] = cnt > 0 ? s / static_cast<double>(cnt) : q;
            out[a].xi_true[k] = dgp_true_xi(spec.name, t0);
        }
    }
    return out;
}

OracleCurves oracle_curves(const DGPSpec& spec, std::span<const double> grid,
                           double alpha, int n_oracle, std::uint64_t seed) {
    const double alphas[1] = {alpha};
    return oracle_curves_multi(spec, grid, alphas, n_oracle, seed)[0];
}

}  // namespace tailadrf
