#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tailadrf {

inline double vec_mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double vec_variance(std::span<const double> v, int ddof = 1) {
    const auto n = v.size();
    if (n <= static_cast<std::size_t>(ddof))
        throw std::invalid_argument("variance needs more observations");
    const double m = vec_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(n - ddof);
}

inline double vec_sd(std::span<const double> v, int ddof = 1) {
    return std::sqrt(vec_variance(v, ddof));
}

// Conventional median: midpoint of the two middle order statistics.
inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Raw median absolute deviation about the median (no consistency factor).
inline double mad_about_median(std::span<const double> v) {
    const double med = median_of(std::vector<double>(v.begin(), v.end()));
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    return median_of(std::move(dev));
}

// Left-continuous step quantile on an ascending-sorted vector: the first
// value whose ECDF reaches tau.
inline double quantile_sorted(std::span<const double> sorted, double tau) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("tau must be in (0,1)");
    const auto n = static_cast<double>(sorted.size());
    auto j = static_cast<std::size_t>(std::ceil(tau * n));
    if (j < 1) j = 1;
    if (j > sorted.size()) j = sorted.size();
    return sorted[j - 1];
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("correlation needs two equal-length vectors");
    const double ma = vec_mean(a), mb = vec_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0)
        throw std::invalid_argument("correlation of constant vector");
    return sab / std::sqrt(saa * sbb);
}

inline double normal_pdf(double x, double mu, double var) {
    const double d = x - mu;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * 3.14159265358979323846 * var);
}

}  // namespace tailadrf
