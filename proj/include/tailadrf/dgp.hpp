#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tailadrf {

enum class DgpName {
    clean,
    sinusoidal_pareto,
    sinusoidal_asymmetric,
    sinusoidal_heavytail,
    sinusoidal_two_paretos,
    regime_switch,
    pareto_plus_gaussian,
    heteroskedastic,
    t_localised,
    multi_context,
    confounded,
};

DgpName dgp_from_string(const std::string& name);
std::string dgp_to_string(DgpName name);

struct DGPSpec {
    DgpName name = DgpName::clean;
    double contamination_p = 0.0;
    int n = 1000;
    std::uint64_t seed = 0;
};

struct Sample {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> x;  // row-major n*d
    std::vector<double> t;
    std::vector<double> y;

    double x_at(std::size_t i, std::size_t j) const { return x[i * d + j]; }
};

struct OracleCurves {
    std::vector<double> grid;
    std::vector<double> theta;    // interventional mean at each grid point
    std::vector<double> q_alpha;  // interventional upper-alpha quantile
    std::vector<double> s_alpha;  // interventional conditional tail mean
    std::vector<double> xi_true;  // analytic tail shape of the DGP
};

// Structural dose-response sin(pi t / 2) + t / 2.
double structural_theta(double t);

// Deterministic synthetic sample for one panel cell.
Sample generate(const DGPSpec& spec);

// Analytic tail shape of Y(t) for the named DGP at treatment t.
double dgp_true_xi(DgpName name, double t);

// Interventional oracle: for each grid point, n_oracle draws with T forced,
// summarized into empirical theta / Q_alpha / S_alpha plus the analytic xi.
OracleCurves oracle_curves(const DGPSpec& spec, std::span<const double> grid,
                           double alpha, int n_oracle, std::uint64_t seed);

// Same draws summarized at several alpha levels at once.
std::vector<OracleCurves> oracle_curves_multi(const DGPSpec& spec,
                                              std::span<const double> grid,
                                              std::span<const double> alphas,
                                              int n_oracle, std::uint64_t seed);

}  // namespace tailadrf
