#include "tailadrf/pdhte.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

constexpr std::uint64_t kStreamHalf = 61;
constexpr std::uint64_t kStreamPoint = 67;
constexpr double kWeightFloor = 1e-6;  // band membership for half-samples
constexpr double kSigmaAnchorKappa = 0.10;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Deviation sample sorted ascending by value, weights aligned.
struct SortedDev {
    std::vector<double> v;
    std::vector<double> w;
    double total = 0.0;
};

SortedDev sort_dev(const WeightedSample& dev) {
    const std::size_t n = dev.values.size();
    if (n != dev.weights.size())
        throw std::invalid_argument("pdhte: value/weight length mismatch");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dev.values[a] < dev.values[b];
    });
    SortedDev out;
    out.v.resize(n);
    out.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = dev.values[order[i]];
        out.w[i] = dev.weights[order[i]];
        out.total += out.w[i];
    }
    return out;
}

struct TopMoments {
    double u_kappa = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;      // strictly above the anchor
    bool anchor_degenerate = false;  // all top mass exactly at the anchor
};

std::optional<TopMoments> top_moments(const SortedDev& dev, double kappa) {
    if (!(kappa > 0.0 && kappa < 0.5)) return std::nullopt;
    if (dev.v.empty() || !(dev.total > 0.0)) return std::nullopt;

    const double target = (1.0 - kappa) * dev.total;
    double cum = 0.0;
    std::size_t anchor_idx = dev.v.size() - 1;
    for (std::size_t i = 0; i < dev.v.size(); ++i) {
        cum += dev.w[i];
        if (cum >= target) {
            anchor_idx = i;
            break;
        }
    }
    const double u = dev.v[anchor_idx];
    if (!(u > 0.0)) return std::nullopt;

    TopMoments tm;
    tm.u_kappa = u;
    const double log_u = std::log(u);
    double wsum = 0.0, s1 = 0.0, s2 = 0.0;
    std::size_t first_above = anchor_idx + 1;
    while (first_above < dev.v.size() && dev.v[first_above] <= u) ++first_above;
    for (std::size_t i = first_above; i < dev.v.size(); ++i) {
        const double s = std::log(dev.v[i]) - log_u;
        wsum += dev.w[i];
        s1 += dev.w[i] * s;
        s2 += dev.w[i] * s * s;
        ++tm.count;
    }
    if (tm.count < 5 || !(wsum > 0.0)) {
        // Zero log-spacings when the whole top sits at the anchor value.
        std::size_t at_anchor = 0;
        for (std::size_t i = anchor_idx; i < dev.v.size() && dev.v[i] == u; ++i)
            ++at_anchor;
        // include ties just below anchor_idx
        for (std::size_t i = anchor_idx; i > 0 && dev.v[i - 1] == u; --i) ++at_anchor;
        if (dev.v.back() == u && at_anchor >= 5) {
            tm.anchor_degenerate = true;
            return tm;
        }
        return std::nullopt;
    }
    tm.m1 = s1 / wsum;
    tm.m2 = s2 / wsum;
    return tm;
}

std::optional<double> hill_sorted(const SortedDev& dev, double kappa) {
    const auto tm = top_moments(dev, kappa);
    if (!tm) return std::nullopt;
    if (tm->anchor_degenerate) return 0.0;
    return tm->m1;
}

std::optional<double> dedh_sorted(const SortedDev& dev, double kappa) {
    const auto tm = top_moments(dev, kappa);
    if (!tm || tm->anchor_degenerate) return std::nullopt;
    if (!(tm->m2 > 0.0)) return std::nullopt;
    const double ratio = tm->m1 * tm->m1 / tm->m2;
    if (std::abs(1.0 - ratio) < 1e-12) return std::nullopt;
    return tm->m1 + 1.0 - 0.5 / (1.0 - ratio);
}

PdhtePoint pdhte_point_sorted(const SortedDev& dev, const PDHTEConfig& cfg,
                              std::uint64_t seed) {
    PdhtePoint pt;
    pt.xi = kNaN;
    pt.sigma = kNaN;
    pt.u_kappa = kNaN;
    pt.anchor_kappa = kNaN;

    std::vector<double> hills;
    hills.reserve(cfg.kappa_grid.size());
    for (double k : cfg.kappa_grid)
        if (auto h = hill_sorted(dev, k)) hills.push_back(*h);
    pt.cv = plateau_cv_from_estimates(hills);
    if (!(pt.cv < cfg.cv_threshold)) return pt;

    std::vector<double> dedh_full;
    dedh_full.reserve(cfg.kappa_grid.size());
    for (double k : cfg.kappa_grid)
        if (auto v = dedh_sorted(dev, k)) dedh_full.push_back(*v);
    if (dedh_full.empty()) return pt;
    const double xi_full = median_of(dedh_full);

    // Half-samples without replacement from the effective band; positions
    // chosen at random, then re-sorted so the fast path stays valid.
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dev.w.size(); ++i)
        if (dev.w[i] > kWeightFloor) pool.push_back(i);
    const std::size_t m = pool.size() / 2;

    double half_sum = 0.0;
    int half_kept = 0;
    if (m >= 10) {
        std::vector<std::size_t> idx(pool.size());
        std::vector<std::size_t> chosen(m);
        SortedDev half;
        half.v.resize(m);
        half.w.resize(m);
        for (int j = 0; j < cfg.n_jk; ++j) {
            idx = pool;
            Rng rng(derive_seed(seed, kStreamHalf + 97 * static_cast<std::uint64_t>(j)));
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t r = i + rng.below(idx.size() - i);
                std::swap(idx[i], idx[r]);
                chosen[i] = idx[i];
            }
            std::sort(chosen.begin(), chosen.end());
            half.total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                half.v[i] = dev.v[chosen[i]];
                half.w[i] = dev.w[chosen[i]];
                half.total += half.w[i];
            }
            std::vector<double> dedh_half;
            for (double k : cfg.kappa_grid)
                if (auto v = dedh_sorted(half, k)) dedh_half.push_back(*v);
            if (!dedh_half.empty()) {
                half_sum += median_of(dedh_half);
                ++half_kept;
            }
        }
    }
    const double xi_half = half_kept > 0 ? half_sum / half_kept : xi_full;

    pt.accepted = true;
    pt.xi = shrink_combine(xi_full, xi_half, cfg.lambda);

    // Companion scale: sigma = u_k * M1 * (1 - min(xi, 0)) at the anchor kappa.
    double anchor_kappa = kSigmaAnchorKappa;
    auto anchor = top_moments(dev, anchor_kappa);
    if (!anchor || anchor->count < 5) {
        for (auto it = cfg.kappa_grid.rbegin(); it != cfg.kappa_grid.rend(); ++it) {
            anchor = top_moments(dev, *it);
            if (anchor && anchor->count >= 5) {
                anchor_kappa = *it;
                break;
            }
        }
    }
    if (anchor && anchor->count >= 5) {
        // sigma(u)/u is estimated by the raw first log-moment, which bulk
        // spillover at the anchor can only dilute downward, and by the
        // debiased shape, which lower-bounds it for positive xi; take the
        // better lower envelope.
        const double ratio = std::max(anchor->m1, std::max(pt.xi, 0.0));
        pt.sigma = anchor->u_kappa * ratio * (1.0 - std::min(pt.xi, 0.0));
        pt.u_kappa = anchor->u_kappa;
        pt.anchor_kappa = anchor_kappa;
    } else {
        pt.accepted = false;
        pt.xi = kNaN;
        pt.sigma = kNaN;
        pt.u_kappa = kNaN;
        pt.anchor_kappa = kNaN;
    }
    return pt;
}

}  // namespace

WeightedSample pilot_centered_deviations(std::span<const double> y,
                                         std::span<const double> t, double t0,
                                         double h,
                                         const std::vector<double>* extra_weights) {
    if (y.size() != t.size())
        throw std::invalid_argument("pilot_centered_deviations: length mismatch");
    std::vector<double> w = gaussian_weights(t, t0, h);
    if (extra_weights) {
        if (extra_weights->size() != w.size())
            throw std::invalid_argument("pilot_centered_deviations: weight length mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= (*extra_weights)[i];
    }
    WeightedSample ws;
    ws.values.assign(y.begin(), y.end());
    ws.weights = w;
    const double med = weighted_median(ws);
    for (double& v : ws.values) v = std::abs(v - med);
    return ws;
}

std::optional<double> kw_hill(const WeightedSample& dev, double kappa) {
    return hill_sorted(sort_dev(dev), kappa);
}

std::optional<double> kw_dedh(const WeightedSample& dev, double kappa) {
    return dedh_sorted(sort_dev(dev), kappa);
}

double plateau_cv_from_estimates(std::span<const double> estimates) {
    if (estimates.size() < 3) return std::numeric_limits<double>::infinity();
    std::vector<double> v(estimates.begin(), estimates.end());
    const double med = median_of(v);
    const double mad = mad_about_median(v);
    return mad / std::max(std::abs(med), 0.05);
}

double plateau_cv(const WeightedSample& dev, const PDHTEConfig& cfg) {
    const SortedDev sorted = sort_dev(dev);
    std::vector<double> hills;
    hills.reserve(cfg.kappa_grid.size());
    for (double k : cfg.kappa_grid)
        if (auto h = hill_sorted(sorted, k)) hills.push_back(*h);
    return plateau_cv_from_estimates(hills);
}

double shrink_combine(double xi_full, double xi_half, double lambda) {
    return xi_full + lambda * (xi_full - xi_half);
}

PdhtePoint pdhte_point(const WeightedSample& dev, const PDHTEConfig& cfg,
                       std::uint64_t seed) {
    return pdhte_point_sorted(sort_dev(dev), cfg, seed);
}

PerTTailCurve pdhte_curve(std::span<const double> y, std::span<const double> t,
                          std::span<const double> grid, const PDHTEConfig& cfg,
                          const std::vector<double>* extra_weights) {
    if (grid.empty()) throw std::invalid_argument("pdhte_curve: empty grid");
    if (y.size() != t.size()) throw std::invalid_argument("pdhte_curve: length mismatch");
    if (extra_weights && extra_weights->size() != y.size())
        throw std::invalid_argument("pdhte_curve: weight length mismatch");
    const double h = silverman_bandwidth(t);
    const std::size_t n = y.size();

    // y sorted once; per grid point only the weights change.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];

    PerTTailCurve curve;
    curve.grid.assign(grid.begin(), grid.end());
    curve.xi.assign(grid.size(), kNaN);
    curve.sigma.assign(grid.size(), kNaN);
    curve.u_kappa.assign(grid.size(), kNaN);
    curve.anchor_kappa.assign(grid.size(), kNaN);
    curve.cv.assign(grid.size(), 0.0);
    curve.accepted.assign(grid.size(), 0);

    std::vector<double> ws(n);
    SortedDev dev;
    dev.v.resize(n);
    dev.w.resize(n);

    std::size_t n_accepted = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t0 = grid[k];
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = order[i];
            double z = (t[j] - t0) / h;
            ws[i] = std::exp(-0.5 * z * z);
            if (extra_weights) ws[i] *= (*extra_weights)[j];
            total += ws[i];
        }
        if (!(total > 0.0)) continue;

        // Pilot median on the pre-sorted outcome, then the deviations
        // |y - med| merge into sorted order from the median outward.
        const double target = 0.5 * total;
        double cum = 0.0;
        std::size_t im = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            cum += ws[i];
            if (cum >= target) {
                im = i;
                break;
            }
        }
        const double med = ys[im];
        std::size_t l = im;  // walks down
        std::size_t r = im + 1;  // walks up
        dev.total = total;
        bool l_done = false;
        for (std::size_t out_i = 0; out_i < n; ++out_i) {
            const double dl = l_done ? std::numeric_limits<double>::infinity()
                                     : med - ys[l];
            const double dr = r < n ? ys[r] - med
                                    : std::numeric_limits<double>::infinity();
            if (dl <= dr) {
                dev.v[out_i] = dl;
                dev.w[out_i] = ws[l];
                if (l == 0) l_done = true;
                else --l;
            } else {
                dev.v[out_i] = dr;
                dev.w[out_i] = ws[r];
                ++r;
            }
        }

        const auto pt = pdhte_point_sorted(
            dev, cfg, derive_seed(cfg.seed, kStreamPoint + 131 * k));
        curve.cv[k] = pt.cv;
        if (pt.accepted) {
            curve.xi[k] = pt.xi;
            curve.sigma[k] = pt.sigma;
            curve.u_kappa[k] = pt.u_kappa;
            curve.anchor_kappa[k] = pt.anchor_kappa;
            curve.accepted[k] = 1;
            ++n_accepted;
        }
    }
    curve.globally_refused =
        static_cast<double>(n_accepted) / static_cast<double>(grid.size()) <
        cfg.global_accept_floor;
    return curve;
}

StabilizedWeights gps_weights(const Sample& sample, const NuisanceFit& nuisance,
                              double winsor_pct, double clip_mult) {
    const std::size_t n = sample.n;
    if (nuisance.m_hat.size() != n)
        throw std::invalid_argument("gps_weights: nuisance size mismatch");

    double v_cond = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = sample.t[i] - nuisance.m_hat[i];
        v_cond += d * d;
    }
    v_cond /= static_cast<double>(n);
    if (!(v_cond > 0.0))
        throw std::invalid_argument("gps_weights: zero residual variance");

    const double mu_t = vec_mean(sample.t);
    double v_marg = 0.0;
    for (double t : sample.t) v_marg += (t - mu_t) * (t - mu_t);
    v_marg /= static_cast<double>(n);
    if (!(v_marg > 0.0))
        throw std::invalid_argument("gps_weights: zero treatment variance");

    StabilizedWeights out;
    out.sw.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double num = normal_pdf(sample.t[i], mu_t, v_marg);
        const double den = normal_pdf(sample.t[i], nuisance.m_hat[i], v_cond);
        out.sw[i] = std::max(num / std::max(den, 1e-300), 1e-100);
    }

    // Winsorize at the upper percentile, then hard-clip at a multiple of the
    // median; the median is unaffected by the winsor step.
    std::vector<double> sorted = out.sw;
    std::sort(sorted.begin(), sorted.end());
    const double win_cap = quantile_sorted(sorted, winsor_pct / 100.0);
    const double clip_cap = clip_mult * median_of(sorted);
    const double cap = std::min(win_cap, clip_cap);
    std::size_t n_clipped = 0;
    for (double& w : out.sw) {
        if (w > cap) {
            w = cap;
            ++n_clipped;
        }
    }
    out.clipped_fraction = static_cast<double>(n_clipped) / static_cast<double>(n);
    return out;
}

}  // namespace tailadrf
