#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailadrf/dml.hpp"
#include "tailadrf/pdhte.hpp"
#include "tailadrf/tail_threshold.hpp"

namespace tailadrf {

struct SignSideFit {
    bool has_fit = false;
    double xi = 0.0;
    double sigma = 0.0;
};

struct SignConditionalFits {
    double u_star = 0.0;
    SignSideFit pos;
    SignSideFit neg;
    std::vector<double> p_pos;  // kernel-weighted exceedance probability per grid point
    std::vector<double> p_neg;
};

enum class QMode { empirical, gpd, refused };
std::string q_mode_name(QMode m);

struct TailFunctionals {
    std::vector<double> grid;
    std::vector<double> q_alpha;       // NaN where refused
    std::vector<QMode> q_mode;
    std::vector<double> s_alpha;       // NaN where undefined
    std::vector<double> cte;           // NaN where undefined
    std::vector<double> ey_recovered;  // NaN where undefined
    bool refused = false;              // some grid point needed an unavailable tail
};

SignConditionalFits sign_conditional_fits(std::span<const double> residuals,
                                          std::span<const double> t, double u_star,
                                          std::span<const double> grid, double h,
                                          const std::vector<double>* extra_weights = nullptr);

// theta_W(t) plus sign-conditional GPD tail-mean corrections; sides with
// exceedance probability under 1% (or no fit) contribute nothing, and an
// active side with xi >= 1 marks the point undefined.
std::vector<double> recover_mean_adrf(const ADRFCurve& theta_w,
                                      const SignConditionalFits& fits);

// GPD mean excess above q: q + (sigma + xi (q - u_star)) / (1 - xi).
// NaN when xi >= 1.
double conditional_shortfall(double q_alpha_t, double xi, double sigma,
                             double u_star);

// Finite-difference derivative of q along the grid: central interior,
// one-sided at the edges. NaN propagates from undefined neighbours.
std::vector<double> causal_tail_effect(std::span<const double> q_curve,
                                       std::span<const double> grid);

struct ReturnLevelPoint {
    double value = 0.0;
    QMode mode = QMode::refused;
    double xi_used = 0.0;
    double sigma_used = 0.0;
    bool fallback_global = false;
};

// Hybrid per-point return level: kernel-weighted empirical quantile when
// alpha * n_eff(t0) >= 1, GPD extrapolation with the per-T (xi, sigma)
// otherwise; refused per-T points or thin effective exceedance sets fall
// back to the global report.
ReturnLevelPoint hybrid_return_level(double theta_w_t0,
                                     std::span<const double> residuals,
                                     std::span<const double> t,
                                     const PerTTailCurve& per_t,
                                     const TailReport& global, double alpha,
                                     double t0, double h,
                                     const std::vector<double>* extra_weights = nullptr);

// Full per-grid assembly of the tail-conditional outputs at one alpha.
TailFunctionals compute_tail_functionals(const ADRFCurve& theta_w,
                                         std::span<const double> residuals,
                                         std::span<const double> t,
                                         const PerTTailCurve& per_t,
                                         const TailReport& global, double alpha,
                                         double h,
                                         const std::vector<double>* extra_weights = nullptr);

}  // namespace tailadrf
