#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tailadrf {

// Two-piece law on |r|: truncated Laplace bulk below u, GPD tail above it.
struct SpliceParams {
    double u = 0.0;
    double b = 1.0;       // Laplace scale
    double xi = 0.0;      // GPD shape
    double sigma = 1.0;   // GPD scale
    double p_tail = 0.0;  // exceedance mass
};

enum class Regime { frechet, weibull, gumbel };
std::string regime_name(Regime r);

struct ThresholdConfig {
    int grid_size = 40;
    int n_min_exc = 30;
    double p_ks_min = 0.0;
    double holdout_fraction = 0.5;
    int bootstrap_b = 200;
    std::uint64_t seed = 0;
};

struct PwmFit {
    double xi = 0.0;
    double sigma = 0.0;
};

// Probability-weighted-moments GPD fit on positive exceedances.
// Throws on fewer than 5 exceedances or a degenerate moment system.
PwmFit pwm_fit(std::span<const double> exceedances);

// Mean log-density of residuals under the splice law.
double splice_loglik(std::span<const double> residuals, const SpliceParams& p);

struct ThresholdSelection {
    double u_star = 0.0;
    SpliceParams fitted;
};

// Composite-likelihood threshold search with exceedance-budget and KS gates;
// returns nullopt (refusal) when no gated candidate beats the bulk-only null
// on the holdout half.
std::optional<ThresholdSelection> select_threshold(std::span<const double> residuals,
                                                   const ThresholdConfig& cfg);

// One-sample KS p-value of exceedances against a fitted GPD, asymptotic
// Kolmogorov law at sqrt(n) scaling.
double gpd_ks_pvalue(std::span<const double> exceedances, double xi, double sigma);

// Percentile 5%/95% of the PWM shape over B resamples.
std::array<double, 2> bootstrap_xi_ci(std::span<const double> exceedances, int B,
                                      std::uint64_t seed);

// u + (sigma/xi) [ (n_exc/(q n))^xi - 1 ], with the log limit at xi = 0.
double return_level(double u, double xi, double sigma, long n_exc, long n,
                    double q);

struct TailReport {
    bool refused = true;
    std::optional<double> u_star;
    std::optional<double> xi_pwm;
    std::optional<std::array<double, 2>> xi_ci;
    std::optional<double> sigma_pwm;
    std::optional<double> p_ks;
    std::optional<Regime> regime;
    std::map<double, double> return_levels;
    long n_exc = 0;
    long n = 0;
};

TailReport build_tail_report(std::span<const double> residuals,
                             const ThresholdConfig& cfg);

}  // namespace tailadrf
