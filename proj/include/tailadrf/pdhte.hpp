#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tailadrf/dgp.hpp"
#include "tailadrf/dml.hpp"
#include "tailadrf/kernels.hpp"

namespace tailadrf {

struct PDHTEConfig {
    std::vector<double> kappa_grid{0.04, 0.06, 0.08, 0.10, 0.12, 0.15, 0.20};
    double cv_threshold = 0.25;
    double lambda = 0.5;
    int n_jk = 4;
    double global_accept_floor = 0.70;
    std::uint64_t seed = 0;
};

// Per-treatment tail curve. xi/sigma/u_kappa are NaN exactly where accepted
// is false; sigma is the GPD scale at the per-point anchor threshold u_kappa,
// the weighted (1 - anchor_kappa)-quantile of the centred deviations.
struct PerTTailCurve {
    std::vector<double> grid;
    std::vector<double> xi;
    std::vector<double> sigma;
    std::vector<double> u_kappa;
    std::vector<double> anchor_kappa;  // exceedance mass sitting above u_kappa
    std::vector<double> cv;
    std::vector<char> accepted;
    bool globally_refused = false;
};

struct StabilizedWeights {
    std::vector<double> sw;
    double clipped_fraction = 0.0;
};

struct PdhtePoint {
    bool accepted = false;
    double xi = 0.0;
    double sigma = 0.0;
    double u_kappa = 0.0;       // threshold the sigma estimate is anchored at
    double anchor_kappa = 0.0;  // top fraction defining that threshold
    double cv = 0.0;
};

// |Y - med_w(Y at t0)| with kernel (times optional extra) weights; the pilot
// median uses the same combined weights.
WeightedSample pilot_centered_deviations(std::span<const double> y,
                                         std::span<const double> t, double t0,
                                         double h,
                                         const std::vector<double>* extra_weights = nullptr);

// Kernel-weighted Hill estimate at top-fraction kappa; nullopt when fewer
// than 5 observations sit above the weighted (1-kappa)-quantile.
std::optional<double> kw_hill(const WeightedSample& dev, double kappa);

// Kernel-weighted Dekkers-Einmahl-de Haan moment estimate at kappa.
std::optional<double> kw_dedh(const WeightedSample& dev, double kappa);

// MAD-over-kappa of the Hill estimates divided by max(|median|, 0.05);
// +inf when fewer than 3 kappa values produce an estimate.
double plateau_cv(const WeightedSample& dev, const PDHTEConfig& cfg);

// The CV formula on raw estimates, exposed for direct checks.
double plateau_cv_from_estimates(std::span<const double> estimates);

// Shrinkage-damped jackknife combination.
double shrink_combine(double xi_full, double xi_half, double lambda);

PdhtePoint pdhte_point(const WeightedSample& dev, const PDHTEConfig& cfg,
                       std::uint64_t seed);

PerTTailCurve pdhte_curve(std::span<const double> y, std::span<const double> t,
                          std::span<const double> grid, const PDHTEConfig& cfg,
                          const std::vector<double>* extra_weights = nullptr);

// Stabilized generalized-propensity-score weights from a Gaussian treatment
// model, winsorized then hard-clipped.
StabilizedWeights gps_weights(const Sample& sample, const NuisanceFit& nuisance,
                              double winsor_pct = 99.0, double clip_mult = 10.0);

}  // namespace tailadrf
