#pragma once

#include <cmath>
#include <limits>

namespace tailadrf {

// Generalized Pareto density/CDF/quantile for exceedances z >= 0.
// For xi < 0 the support is [0, -sigma/xi]; points beyond it get density 0
// and CDF 1.

inline double gpd_logpdf(double z, double xi, double sigma) {
    if (sigma <= 0.0 || z < 0.0) return -std::numeric_limits<double>::infinity();
    if (std::abs(xi) < 1e-12) return -z / sigma - std::log(sigma);
    const double t = 1.0 + xi * z / sigma;
    if (t <= 0.0) return -std::numeric_limits<double>::infinity();
    return -(1.0 / xi + 1.0) * std::log(t) - std::log(sigma);
}

inline double gpd_pdf(double z, double xi, double sigma) {
    return std::exp(gpd_logpdf(z, xi, sigma));
}

inline double gpd_cdf(double z, double xi, double sigma) {
    if (z <= 0.0) return 0.0;
    if (std::abs(xi) < 1e-12) return 1.0 - std::exp(-z / sigma);
    const double t = 1.0 + xi * z / sigma;
    if (t <= 0.0) return 1.0;  // beyond the upper endpoint for xi < 0
    return 1.0 - std::pow(t, -1.0 / xi);
}

inline double gpd_quantile(double p, double xi, double sigma) {
    if (std::abs(xi) < 1e-12) return -sigma * std::log(1.0 - p);
    return sigma * (std::pow(1.0 - p, -xi) - 1.0) / xi;
}

}  // namespace tailadrf
