#include "tailadrf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kPinballMaxIter = 100;
constexpr double kPinballTol = 1e-9;

// Smoothed check loss: asymmetric weight times the Huberized absolute value.
double pinball_objective(std::span<const double> y, std::span<const double> dt,
                         std::span<const double> kern, double a, double b,
                         double tau, double delta) {
    double j = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - a - b * dt[i];
        const double c = e >= 0.0 ? tau : 1.0 - tau;
        const double ae = std::abs(e);
        const double huber = ae <= delta ? 0.5 * ae * ae / delta : ae - 0.5 * delta;
        j += kern[i] * c * huber;
    }
    return j;
}

struct Wls2 {
    double a, b;
};

Wls2 solve_wls(std::span<const double> y, std::span<const double> dt,
               std::span<const double> w) {
    double s0 = 0, s1 = 0, s2 = 0, sy = 0, sty = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s0 += w[i];
        s1 += w[i] * dt[i];
        s2 += w[i] * dt[i] * dt[i];
        sy += w[i] * y[i];
        sty += w[i] * dt[i] * y[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (!(s0 > 0.0) || !(det > 1e-12 * std::max(1.0, s0 * s2)))
        throw std::runtime_error("pinball fit: degenerate band");
    return {(s2 * sy - s1 * sty) / det, (s0 * sty - s1 * sy) / det};
}

}  // namespace

PinballFit local_linear_pinball(std::span<const double> y,
                                std::span<const double> t, double t0, double h,
                                double tau, std::vector<double>* trace) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("pinball fit: tau must be in (0,1)");
    if (!(h > 0.0)) throw std::invalid_argument("pinball fit: h must be > 0");
    if (y.size() != t.size()) throw std::invalid_argument("pinball fit: length mismatch");
    const std::size_t n = y.size();

    std::vector<double> dt(n), kern(n);
    std::size_t n_local = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dt[i] = t[i] - t0;
        const double z = dt[i] / h;
        kern[i] = std::exp(-0.5 * z * z);
        if (kern[i] > 1e-8) ++n_local;
    }
    if (n_local < 10)
        throw std::runtime_error("pinball fit: fewer than 10 observations in band");

    double sd_y = 0.0;
    try {
        sd_y = vec_sd(y);
    } catch (const std::invalid_argument&) {
    }
    const double delta = std::max(1e-4 * sd_y, 1e-12);

    Wls2 cur = solve_wls(y, dt, kern);
    double j_cur = pinball_objective(y, dt, kern, cur.a, cur.b, tau, delta);
    if (trace) trace->push_back(j_cur);

    PinballFit out{cur.a, cur.b, true, 0};
    std::vector<double> w(n);
    for (int iter = 1; iter <= kPinballMaxIter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - cur.a - cur.b * dt[i];
            const double c = e >= 0.0 ? tau : 1.0 - tau;
            w[i] = kern[i] * c / std::max(std::abs(e), delta);
        }
        Wls2 next = solve_wls(y, dt, w);
        double j_next = pinball_objective(y, dt, kern, next.a, next.b, tau, delta);
        int halvings = 0;
        while (j_next > j_cur && halvings < 40) {
            next.a = 0.5 * (next.a + cur.a);
            next.b = 0.5 * (next.b + cur.b);
            j_next = pinball_objective(y, dt, kern, next.a, next.b, tau, delta);
            ++halvings;
        }
        if (j_next > j_cur) break;  // no descent direction left

        const double scale = std::max({1e-12, std::abs(next.a), std::abs(next.b)});
        const double step = std::max(std::abs(next.a - cur.a), std::abs(next.b - cur.b));
        cur = next;
        j_cur = j_next;
        if (trace) trace->push_back(j_cur);
        out.intercept = cur.a;
        out.slope = cur.b;
        out.iterations = iter;
        if (step <= kPinballTol * scale) return out;
    }
    out.converged = false;
    return out;
}

QRCurve qr_quantile_curve(const Sample& sample, std::span<const double> grid,
                          double tau, double h) {
    QRCurve curve;
    curve.grid.assign(grid.begin(), grid.end());
    curve.tau = tau;
    curve.q_hat.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        curve.q_hat[k] =
            local_linear_pinball(sample.y, sample.t, grid[k], h, tau).intercept;
    return curve;
}

double pickands_xi_from_quantiles(double q1, double q2, double q4) {
    const double d1 = q1 - q2;
    const double d2 = q2 - q4;
    if (!(d1 > 0.0) || !(d2 > 0.0)) return kNaN;
    return std::log(d1 / d2) / std::log(2.0);
}

std::vector<double> qr_xi_proxy(const Sample& sample, std::span<const double> grid,
                                double alpha_base, double h) {
    if (!(alpha_base > 0.0 && 4.0 * alpha_base < 1.0))
        throw std::invalid_argument("qr_xi_proxy: alpha_base too large");
    const QRCurve q1 = qr_quantile_curve(sample, grid, 1.0 - alpha_base, h);
    const QRCurve q2 = qr_quantile_curve(sample, grid, 1.0 - 2.0 * alpha_base, h);
    const QRCurve q4 = qr_quantile_curve(sample, grid, 1.0 - 4.0 * alpha_base, h);

    std::vector<double> xi(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        xi[k] = pickands_xi_from_quantiles(q1.q_hat[k], q2.q_hat[k], q4.q_hat[k]);
    return xi;
}

std::vector<double> qr_avg_shortfall(const Sample& sample,
                                     std::span<const double> grid, double alpha,
                                     int M, double h) {
    if (M < 1) throw std::invalid_argument("qr_avg_shortfall: M must be >= 1");
    std::vector<double> avg(grid.size(), 0.0);
    for (int m = 1; m <= M; ++m) {
        const double tau = 1.0 - alpha * (static_cast<double>(m) - 0.5) /
                                     static_cast<double>(M);
        const QRCurve c = qr_quantile_curve(sample, grid, tau, h);
        for (std::size_t k = 0; k < grid.size(); ++k) avg[k] += c.q_hat[k];
    }
    for (double& v : avg) v /= static_cast<double>(M);
    return avg;
}

PwmFit weighted_pwm_fit(const WeightedSample& exceedances) {
    const std::size_t n = exceedances.values.size();
    if (n != exceedances.weights.size())
        throw std::invalid_argument("weighted_pwm_fit: length mismatch");
    if (n < 5) throw std::invalid_argument("weighted_pwm_fit: need at least 5 exceedances");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return exceedances.values[a] < exceedances.values[b];
    });
    double total = 0.0;
    for (double w : exceedances.weights) {
        if (w < 0.0) throw std::invalid_argument("weighted_pwm_fit: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weighted_pwm_fit: zero total weight");
    if (!(exceedances.values[order.front()] > 0.0))
        throw std::invalid_argument("weighted_pwm_fit: exceedances must be positive");

    // Leave-one-out plotting position (1 - C_j) / (1 - w_j) generalizes
    // (n - j)/(n - 1) and reduces to it exactly under equal weights.
    double a0 = 0.0, a1 = 0.0, cum = 0.0;
    for (std::size_t j : order) {
        const double w = exceedances.weights[j] / total;
        const double v = exceedances.values[j];
        cum += w;
        a0 += w * v;
        if (w >= 1.0 - 1e-12)
            throw std::invalid_argument("weighted_pwm_fit: a single point carries all weight");
        a1 += w * v * (1.0 - cum) / (1.0 - w);
    }
    const double denom = a0 - 2.0 * a1;
    if (!(denom > 1e-12 * a0))
        throw std::invalid_argument("weighted_pwm_fit: degenerate moment system");
    PwmFit fit;
    fit.xi = 2.0 - a0 / denom;
    fit.sigma = 2.0 * a0 * a1 / denom;
    if (!(fit.sigma > 0.0))
        throw std::invalid_argument("weighted_pwm_fit: non-positive scale");
    return fit;
}

RpwmCurve residual_pwm_return_level(const ADRFCurve& theta_w,
                                    std::span<const double> residuals,
                                    std::span<const double> t,
                                    std::span<const double> grid, double alpha,
                                    double u_star, long n_exc, long n, double h) {
    if (residuals.size() != t.size())
        throw std::invalid_argument("residual_pwm_return_level: length mismatch");
    if (theta_w.grid.size() != grid.size())
        throw std::invalid_argument("residual_pwm_return_level: grid mismatch");

    std::vector<double> exc_values, exc_t;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        const double a = std::abs(residuals[i]);
        if (a > u_star) {
            exc_values.push_back(a - u_star);
            exc_t.push_back(t[i]);
        }
    }
    const PwmFit global = pwm_fit(exc_values);

    RpwmCurve out;
    out.values.resize(grid.size());
    out.xi.resize(grid.size());
    out.sigma.resize(grid.size());
    out.fallback_global.assign(grid.size(), 0);
    WeightedSample ws;
    ws.values = exc_values;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ws.weights = gaussian_weights(exc_t, grid[k], h);
        PwmFit fit = global;
        try {
            fit = weighted_pwm_fit(ws);
        } catch (const std::invalid_argument&) {
            out.fallback_global[k] = 1;
        }
        out.xi[k] = fit.xi;
        out.sigma[k] = fit.sigma;
        out.values[k] = theta_w.theta[k] +
                        return_level(u_star, fit.xi, fit.sigma, n_exc, n, alpha);
    }
    return out;
}

}  // namespace tailadrf
