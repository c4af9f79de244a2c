#pragma once

#include <span>
#include <vector>

#include "tailadrf/dgp.hpp"
#include "tailadrf/dml.hpp"
#include "tailadrf/kernels.hpp"
#include "tailadrf/tail_threshold.hpp"

namespace tailadrf {

struct QRCurve {
    std::vector<double> grid;
    double tau = 0.5;
    std::vector<double> q_hat;
};

struct PinballFit {
    double intercept = 0.0;
    double slope = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Kernel-weighted local-linear quantile fit by IRLS on the smoothed check
// loss, with backtracking so the objective never increases. An optional
// trace records the accepted objective values.
PinballFit local_linear_pinball(std::span<const double> y,
                                std::span<const double> t, double t0, double h,
                                double tau, std::vector<double>* trace = nullptr);

QRCurve qr_quantile_curve(const Sample& sample, std::span<const double> grid,
                          double tau, double h);

// Log-quantile-ratio shape estimate from quantiles at levels 1-a, 1-2a, 1-4a.
// NaN when a gap is non-positive.
double pickands_xi_from_quantiles(double q1, double q2, double q4);

// Pickands-style proxy for the tail shape from QR fits at the three levels.
std::vector<double> qr_xi_proxy(const Sample& sample, std::span<const double> grid,
                                double alpha_base, double h);

// Midpoint-rule average of M QR curves at levels 1 - alpha (m - 1/2) / M.
std::vector<double> qr_avg_shortfall(const Sample& sample,
                                     std::span<const double> grid, double alpha,
                                     int M, double h);

// PWM on a weighted exceedance sample, plotting positions from the
// normalized cumulative weights; reduces to pwm_fit under equal weights.
PwmFit weighted_pwm_fit(const WeightedSample& exceedances);

struct RpwmCurve {
    std::vector<double> values;        // theta_W + return level per grid point
    std::vector<double> xi;            // per-point weighted-PWM shape
    std::vector<double> sigma;
    std::vector<char> fallback_global; // weighted fit was invalid at this point
};

// Residual-PWM POT baseline: weighted PWM on kernel-weighted absolute
// residual exceedances above the global threshold, plugged into the
// return-level formula.
RpwmCurve residual_pwm_return_level(const ADRFCurve& theta_w,
                                    std::span<const double> residuals,
                                    std::span<const double> t,
                                    std::span<const double> grid, double alpha,
                                    double u_star, long n_exc, long n, double h);

}  // namespace tailadrf
