#include "tailadrf/dml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tailadrf/kernels.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

constexpr std::uint64_t kStreamFolds = 23;
constexpr int kIrlsMaxIter = 50;
constexpr double kIrlsTol = 1e-8;

double rho_value(const LossSpec& loss, double u) {
    switch (loss.kind) {
        case LossKind::standard_l2:
            return 0.5 * u * u;
        case LossKind::huber: {
            const double e = loss.huber_epsilon;
            const double a = std::abs(u);
            return a <= e ? 0.5 * u * u : e * a - 0.5 * e * e;
        }
        case LossKind::welsch: {
            const double g = loss.welsch_gamma;
            return (1.0 - std::exp(-g * u * u)) / (2.0 * g);
        }
    }
    return 0.0;
}

struct Wls2x2 {
    double intercept;
    double slope;
};

// Weighted least squares of r on (1, dt).
Wls2x2 solve_wls(std::span<const double> r, std::span<const double> dt,
                 std::span<const double> w) {
    double s0 = 0, s1 = 0, s2 = 0, sy = 0, sty = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        s0 += w[i];
        s1 += w[i] * dt[i];
        s2 += w[i] * dt[i] * dt[i];
        sy += w[i] * r[i];
        sty += w[i] * dt[i] * r[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (!(s0 > 0.0) || !(det > 1e-12 * std::max(1.0, s0 * s2)))
        throw std::runtime_error("local fit: singular weighted design");
    return {(s2 * sy - s1 * sty) / det, (s0 * sty - s1 * sy) / det};
}

double weighted_objective(const LossSpec& loss, std::span<const double> r,
                          std::span<const double> dt,
                          std::span<const double> kern, double a, double b,
                          double sigma) {
    double j = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double e = r[i] - a - b * dt[i];
        j += kern[i] * rho_value(loss, e / sigma);
    }
    return j;
}

}  // namespace

LossKind loss_from_string(const std::string& s) {
    if (s == "l2" || s == "standard" || s == "standard_l2") return LossKind::standard_l2;
    if (s == "huber") return LossKind::huber;
    if (s == "welsch") return LossKind::welsch;
    throw std::invalid_argument("unknown loss: " + s);
}

std::string loss_to_string(LossKind k) {
    switch (k) {
        case LossKind::standard_l2: return "standard_l2";
        case LossKind::huber: return "huber";
        case LossKind::welsch: return "welsch";
    }
    return "unknown";
}

double rho_weight(const LossSpec& loss, double u) {
    switch (loss.kind) {
        case LossKind::standard_l2:
            return 1.0;
        case LossKind::huber: {
            const double a = std::abs(u);
            return a <= loss.huber_epsilon ? 1.0 : loss.huber_epsilon / a;
        }
        case LossKind::welsch:
            return std::exp(-loss.welsch_gamma * u * u);
    }
    return 1.0;
}

NuisanceFit crossfit_nuisances(const Sample& sample, int k_folds,
                               std::uint64_t seed) {
    const std::size_t n = sample.n;
    const std::size_t d = sample.d;
    if (k_folds < 2) throw std::invalid_argument("crossfit: k_folds must be >= 2");
    if (n < static_cast<std::size_t>(10 * k_folds))
        throw std::invalid_argument("crossfit: need at least 10 observations per fold");

    NuisanceFit fit;
    fit.g_hat.assign(n, 0.0);
    fit.m_hat.assign(n, 0.0);
    fit.fold_id.assign(n, 0);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, kStreamFolds));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.below(i + 1)]);
    for (std::size_t i = 0; i < n; ++i)
        fit.fold_id[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));

    // Per fold: Nadaraya-Watson with a product Gaussian kernel on
    // standardized training covariates; the multivariate Silverman factor
    // n^{-1/(d+4)} keeps the smoother from collapsing to nearest-neighbour
    // lookups in d = 5, and the extra 1.5 oversmooths toward lower variance,
    // which the propensity-density ratio downstream needs.
    const double c_d = 1.5 * std::pow(4.0 / (static_cast<double>(d) + 2.0),
                                      1.0 / (static_cast<double>(d) + 4.0));
    for (int f = 0; f < k_folds; ++f) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
        train.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            (fit.fold_id[i] == f ? test : train).push_back(i);

        const double n_tr = static_cast<double>(train.size());
        std::vector<double> mu(d, 0.0), sd(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i : train) mu[j] += sample.x_at(i, j);
            mu[j] /= n_tr;
            for (std::size_t i : train) {
                const double dx = sample.x_at(i, j) - mu[j];
                sd[j] += dx * dx;
            }
            sd[j] = std::sqrt(sd[j] / std::max(1.0, n_tr - 1.0));
            if (!(sd[j] > 1e-12)) sd[j] = 1.0;
        }
        const double h = c_d * std::pow(n_tr, -1.0 / (static_cast<double>(d) + 4.0));
        const double inv2h2 = 1.0 / (2.0 * h * h);

        std::vector<double> zx(train.size() * d);
        double y_bar = 0.0, t_bar = 0.0;
        for (std::size_t a = 0; a < train.size(); ++a) {
            const std::size_t i = train[a];
            for (std::size_t j = 0; j < d; ++j)
                zx[a * d + j] = (sample.x_at(i, j) - mu[j]) / sd[j];
            y_bar += sample.y[i];
            t_bar += sample.t[i];
        }
        y_bar /= n_tr;
        t_bar /= n_tr;

        std::vector<double> zq(d);
        for (std::size_t i : test) {
            for (std::size_t j = 0; j < d; ++j)
                zq[j] = (sample.x_at(i, j) - mu[j]) / sd[j];
            double sw = 0.0, swy = 0.0, swt = 0.0;
            for (std::size_t a = 0; a < train.size(); ++a) {
                double dist2 = 0.0;
                const double* za = &zx[a * d];
                for (std::size_t j = 0; j < d; ++j) {
                    const double dz = zq[j] - za[j];
                    dist2 += dz * dz;
                }
                const double e = dist2 * inv2h2;
                if (e > 40.0) continue;  // weight below 4e-18
                const double w = std::exp(-e);
                sw += w;
                swy += w * sample.y[train[a]];
                swt += w * sample.t[train[a]];
            }
            if (sw > 1e-300) {
                fit.g_hat[i] = swy / sw;
                fit.m_hat[i] = swt / sw;
            } else {
                fit.g_hat[i] = y_bar;
                fit.m_hat[i] = t_bar;
            }
        }
    }
    return fit;
}

LocalFitResult local_linear_m_fit(std::span<const double> r,
                                  std::span<const double> t, double t0,
                                  double h, const LossSpec& loss,
                                  IrlsTrace* trace) {
    if (!(h > 0.0)) throw std::invalid_argument("local fit: h must be > 0");
    if (r.size() != t.size()) throw std::invalid_argument("local fit: length mismatch");
    const std::size_t n = r.size();

    std::vector<double> dt(n), kern(n);
    std::size_t n_local = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dt[i] = t[i] - t0;
        const double z = dt[i] / h;
        kern[i] = std::exp(-0.5 * z * z);
        if (kern[i] > 1e-8) ++n_local;
    }
    if (n_local < 10)
        throw std::runtime_error("local fit: fewer than 10 observations in band");

    Wls2x2 cur = solve_wls(r, dt, kern);
    LocalFitResult out{cur.intercept, cur.slope, true, 0};
    if (loss.kind == LossKind::standard_l2) return out;

    std::vector<double> w(n), e(n);
    for (int iter = 1; iter <= kIrlsMaxIter; ++iter) {
        for (std::size_t i = 0; i < n; ++i)
            e[i] = std::abs(r[i] - cur.intercept - cur.slope * dt[i]);
        const double sigma = 1.4826 * weighted_quantile({e, kern}, 0.5);
        if (!(sigma > 1e-12)) {
            out.iterations = iter;
            return out;  // interpolating fit, nothing left to reweight
        }
        for (std::size_t i = 0; i < n; ++i)
            w[i] = kern[i] * rho_weight(loss, e[i] / sigma);

        Wls2x2 next = solve_wls(r, dt, w);
        if (trace) {
            trace->before.push_back(weighted_objective(loss, r, dt, kern,
                                                       cur.intercept, cur.slope, sigma));
            trace->after.push_back(weighted_objective(loss, r, dt, kern,
                                                      next.intercept, next.slope, sigma));
        }
        const double scale =
            std::max({1e-12, std::abs(next.intercept), std::abs(next.slope), sigma});
        const double delta = std::max(std::abs(next.intercept - cur.intercept),
                                      std::abs(next.slope - cur.slope));
        cur = next;
        out.intercept = cur.intercept;
        out.slope = cur.slope;
        out.iterations = iter;
        if (delta <= kIrlsTol * scale) return out;
    }
    out.converged = false;
    return out;
}

ADRFCurve adrf_from_residuals(std::span<const double> r,
                              std::span<const double> t,
                              std::vector<double> grid, double h,
                              const LossSpec& loss, double g_hat_mean) {
    ADRFCurve curve;
    curve.grid = std::move(grid);
    curve.theta.resize(curve.grid.size());
    curve.loss = loss.kind;
    curve.bandwidth = h;
    for (std::size_t k = 0; k < curve.grid.size(); ++k) {
        const auto fit = local_linear_m_fit(r, t, curve.grid[k], h, loss);
        curve.theta[k] = fit.intercept + g_hat_mean;
    }
    return curve;
}

ADRFCurve estimate_adrf(const Sample& sample, std::vector<double> grid,
                        const LossSpec& loss, int k_folds, std::uint64_t seed) {
    const NuisanceFit nuis = crossfit_nuisances(sample, k_folds, seed);
    std::vector<double> r(sample.n);
    for (std::size_t i = 0; i < sample.n; ++i)
        r[i] = sample.y[i] - nuis.g_hat[i];
    const double g_mean = vec_mean(nuis.g_hat);
    const double h = silverman_bandwidth(sample.t);
    return adrf_from_residuals(r, sample.t, std::move(grid), h, loss, g_mean);
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("linspace: n must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + step * i;
    return out;
}

std::vector<double> interp_linear(std::span<const double> grid,
                                  std::span<const double> values,
                                  std::span<const double> query) {
    if (grid.size() != values.size() || grid.empty())
        throw std::invalid_argument("interp_linear: bad curve");
    std::vector<double> out(query.size());
    if (grid.size() == 1) {
        for (std::size_t i = 0; i < query.size(); ++i) out[i] = values[0];
        return out;
    }
    for (std::size_t i = 0; i < query.size(); ++i) {
        const double q = query[i];
        std::size_t hi = std::lower_bound(grid.begin(), grid.end(), q) - grid.begin();
        if (hi == 0) hi = 1;
        if (hi >= grid.size()) hi = grid.size() - 1;
        const std::size_t lo = hi - 1;
        const double frac = (q - grid[lo]) / (grid[hi] - grid[lo]);
        out[i] = values[lo] + frac * (values[hi] - values[lo]);
    }
    return out;
}

std::vector<double> curve_residuals(std::span<const double> y,
                                    std::span<const double> t,
                                    const ADRFCurve& curve) {
    if (y.size() != t.size())
        throw std::invalid_argument("curve_residuals: length mismatch");
    const std::vector<double> theta_at = interp_linear(curve.grid, curve.theta, t);
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - theta_at[i];
    return r;
}

}  // namespace tailadrf
