#pragma once

#include <span>
#include <vector>

namespace tailadrf {

// Values paired with non-negative weights; the shared currency of every
// kernel-weighted statistic in the library.
struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;
};

// h = 1.06 * sd(t) * n^{-1/5}. Throws on n < 2 or zero spread.
double silverman_bandwidth(std::span<const double> t);

// w_i = exp(-((t_i - t0)/h)^2 / 2). Throws on h <= 0.
std::vector<double> gaussian_weights(std::span<const double> t, double t0, double h);

// Left-continuous step quantile of the normalized weighted ECDF: the first
// value v with F_w(v) >= tau. Throws on empty input or zero total weight.
double weighted_quantile(const WeightedSample& ws, double tau);

double weighted_median(const WeightedSample& ws);

// Same convention as weighted_quantile for values already sorted ascending,
// with weights in value order. Used on hot paths to avoid re-sorting.
double weighted_quantile_presorted(std::span<const double> sorted_values,
                                   std::span<const double> weights,
                                   double tau);

double effective_n(std::span<const double> weights);

}  // namespace tailadrf
