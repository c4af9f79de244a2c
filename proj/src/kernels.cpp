#include "tailadrf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tailadrf/stats.hpp"

namespace tailadrf {

double silverman_bandwidth(std::span<const double> t) {
    if (t.size() < 2)
        throw std::invalid_argument("silverman_bandwidth: need at least 2 points");
    const double sd = vec_sd(t);
    if (!(sd > 0.0))
        throw std::invalid_argument("silverman_bandwidth: zero spread");
    return 1.06 * sd * std::pow(static_cast<double>(t.size()), -0.2);
}

std::vector<double> gaussian_weights(std::span<const double> t, double t0, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("gaussian_weights: h must be > 0");
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = (t[i] - t0) / h;
        w[i] = std::exp(-0.5 * d * d);
    }
    return w;
}

double weighted_quantile(const WeightedSample& ws, double tau) {
    if (ws.values.size() != ws.weights.size())
        throw std::invalid_argument("weighted_quantile: length mismatch");
    if (ws.values.empty())
        throw std::invalid_argument("weighted_quantile: empty sample");
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("weighted_quantile: tau must be in (0,1)");

    std::vector<std::size_t> order(ws.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ws.values[a] < ws.values[b];
    });

    double total = 0.0;
    for (double w : ws.weights) {
        if (w < 0.0) throw std::invalid_argument("weighted_quantile: negative weight");
        total += w;
    }
    if (!(total > 0.0))
        throw std::invalid_argument("weighted_quantile: zero total weight");

    const double target = tau * total;
    double cum = 0.0;
    for (std::size_t k : order) {
        cum += ws.weights[k];
        if (cum >= target) return ws.values[k];
    }
    return ws.values[order.back()];
}

double weighted_median(const WeightedSample& ws) {
    return weighted_quantile(ws, 0.5);
}

double weighted_quantile_presorted(std::span<const double> sorted_values,
                                   std::span<const double> weights,
                                   double tau) {
    if (sorted_values.size() != weights.size() || sorted_values.empty())
        throw std::invalid_argument("weighted_quantile_presorted: bad input");
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0))
        throw std::invalid_argument("weighted_quantile_presorted: zero total weight");
    const double target = tau * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < sorted_values.size(); ++i) {
        cum += weights[i];
        if (cum >= target) return sorted_values[i];
    }
    return sorted_values.back();
}

double effective_n(std::span<const double> weights) {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

}  // namespace tailadrf
