#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailadrf/dgp.hpp"

namespace tailadrf {

enum class LossKind { standard_l2, huber, welsch };

LossKind loss_from_string(const std::string& s);
std::string loss_to_string(LossKind k);

struct LossSpec {
    LossKind kind = LossKind::welsch;
    double huber_epsilon = 1.35;
    double welsch_gamma = 0.10;
};

// Out-of-fold nuisance predictions; every entry comes from a model that never
// saw its own fold.
struct NuisanceFit {
    std::vector<double> g_hat;  // E[Y | X]
    std::vector<double> m_hat;  // E[T | X]
    std::vector<int> fold_id;
};

struct ADRFCurve {
    std::vector<double> grid;
    std::vector<double> theta;
    LossKind loss = LossKind::welsch;
    double bandwidth = 0.0;
};

struct LocalFitResult {
    double intercept = 0.0;
    double slope = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Objective value at the pre-step scale, before and after each IRLS step.
struct IrlsTrace {
    std::vector<double> before;
    std::vector<double> after;
};

// IRLS weight of a standardized residual under the given loss.
double rho_weight(const LossSpec& loss, double u);

NuisanceFit crossfit_nuisances(const Sample& sample, int k_folds,
                               std::uint64_t seed);

// Kernel-weighted local-linear M-fit of r on t at t0; returns the intercept.
LocalFitResult local_linear_m_fit(std::span<const double> r,
                                  std::span<const double> t, double t0,
                                  double h, const LossSpec& loss,
                                  IrlsTrace* trace = nullptr);

ADRFCurve estimate_adrf(const Sample& sample, std::vector<double> grid,
                        const LossSpec& loss, int k_folds, std::uint64_t seed);

// Curve assembly from precomputed residuals: local-linear fit per grid point
// plus the mean of g_hat to restore the outcome level.
ADRFCurve adrf_from_residuals(std::span<const double> r,
                              std::span<const double> t,
                              std::vector<double> grid, double h,
                              const LossSpec& loss, double g_hat_mean);

std::vector<double> linspace(double lo, double hi, int n);

// Piecewise-linear interpolation of curve values at query points, linearly
// extrapolated beyond the grid ends.
std::vector<double> interp_linear(std::span<const double> grid,
                                  std::span<const double> values,
                                  std::span<const double> query);

// Full-model residuals y - theta(t), with the curve evaluated at each
// observation by interpolation.
std::vector<double> curve_residuals(std::span<const double> y,
                                    std::span<const double> t,
                                    const ADRFCurve& curve);

}  // namespace tailadrf
