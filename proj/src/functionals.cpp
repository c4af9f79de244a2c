#include "tailadrf/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kFloorProb = 0.01;   // sides below this get no tail-mean term
constexpr double kMinEffExc = 15.0;   // per-T to global fallback floor

std::size_t nearest_grid_index(std::span<const double> grid, double t0) {
    std::size_t best = 0;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double d = std::abs(grid[k] - t0);
        if (d < dmin) {
            dmin = d;
            best = k;
        }
    }
    return best;
}

std::vector<double> point_weights(std::span<const double> t, double t0, double h,
                                  const std::vector<double>* extra) {
    std::vector<double> w = gaussian_weights(t, t0, h);
    if (extra) {
        if (extra->size() != w.size())
            throw std::invalid_argument("tail functionals: weight length mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= (*extra)[i];
    }
    return w;
}

struct ResolvedTail {
    bool ok = false;
    double xi = 0.0;
    double sigma = 0.0;       // GPD scale at anchor_u
    double anchor_u = 0.0;    // residual-scale threshold the fit lives at
    double anchor_prob = 0.0; // exceedance probability of anchor_u
    bool fallback = false;
};

// Per-T parameters when the point is accepted and enough exceedance mass sits
// nearby; otherwise the global report. The per-T fit is anchored at its own
// threshold u_kappa with exceedance mass anchor_kappa; the global fit at
// u_star with mass n_exc / n.
ResolvedTail resolve_tail_params(const PerTTailCurve& per_t, std::size_t k,
                                 double n_exc_eff, const TailReport& global) {
    const bool per_t_ok =
        k < per_t.accepted.size() && per_t.accepted[k] &&
        (global.refused || n_exc_eff >= kMinEffExc);
    ResolvedTail r;
    if (per_t_ok && per_t.sigma[k] > 0.0) {
        r.ok = true;
        r.xi = per_t.xi[k];
        r.sigma = per_t.sigma[k];
        r.anchor_u = per_t.u_kappa[k];
        r.anchor_prob = per_t.anchor_kappa[k];
        return r;
    }
    if (!global.refused) {
        r.ok = true;
        r.fallback = true;
        r.xi = *global.xi_pwm;
        r.sigma = *global.sigma_pwm;
        r.anchor_u = *global.u_star;
        r.anchor_prob =
            static_cast<double>(global.n_exc) / static_cast<double>(global.n);
        return r;
    }
    r.ok = false;
    return r;
}

// POT return level from an anchor (u0, p0): u0 + (sigma0/xi)[(p0/alpha)^xi - 1].
double pot_return_level(double u0, double p0, double xi, double sigma0,
                        double alpha) {
    const double ratio = p0 / alpha;
    if (std::abs(xi) < 1e-6) return u0 + sigma0 * std::log(ratio);
    return u0 + sigma0 / xi * (std::pow(ratio, xi) - 1.0);
}

// GPD branch of the hybrid. A per-T fit re-anchors at the deepest
// sample-resolved quantile q0 (level 1 - 1/n_eff, where the empirical branch
// hands over), with the scale carried there by threshold stability; the GPD
// then only bridges the unresolved remainder. The global fallback evaluates
// the return-level formula at its own threshold as reported.
struct GpdBranchResult {
    bool ok = false;
    double value = 0.0;
};

GpdBranchResult gpd_branch_value(const ResolvedTail& tail, double alpha,
                                 double n_eff,
                                 const std::function<double(double)>& resid_quantile,
                                 const TailReport& global) {
    GpdBranchResult out;
    if (!tail.fallback && n_eff > 2.0) {
        const double alpha0 = 1.0 / n_eff;
        if (alpha0 < 0.5 && alpha0 > alpha) {
            const double q0 = resid_quantile(1.0 - alpha0);
            const double sigma0 = tail.sigma + tail.xi * (q0 - tail.anchor_u);
            if (sigma0 > 0.0) {
                out.ok = true;
                out.value = pot_return_level(q0, alpha0, tail.xi, sigma0, alpha);
                return out;
            }
        }
    }
    if (!global.refused) {
        out.ok = true;
        out.value = return_level(*global.u_star, *global.xi_pwm, *global.sigma_pwm,
                                 global.n_exc, global.n, alpha);
    }
    return out;
}

}  // namespace

std::string q_mode_name(QMode m) {
    switch (m) {
        case QMode::empirical: return "empirical";
        case QMode::gpd: return "gpd";
        case QMode::refused: return "refused";
    }
    return "unknown";
}

SignConditionalFits sign_conditional_fits(std::span<const double> residuals,
                                          std::span<const double> t, double u_star,
                                          std::span<const double> grid, double h,
                                          const std::vector<double>* extra_weights) {
    if (!(u_star > 0.0))
        throw std::invalid_argument("sign_conditional_fits: u_star must be > 0");
    if (residuals.size() != t.size())
        throw std::invalid_argument("sign_conditional_fits: length mismatch");

    SignConditionalFits out;
    out.u_star = u_star;

    std::vector<double> pos_exc, neg_exc;
    for (double r : residuals) {
        if (r > u_star) pos_exc.push_back(r - u_star);
        if (r < -u_star) neg_exc.push_back(-r - u_star);
    }
    auto try_fit = [](const std::vector<double>& exc) {
        SignSideFit f;
        if (exc.size() >= 5) {
            try {
                const PwmFit pwm = pwm_fit(exc);
                f.has_fit = true;
                f.xi = pwm.xi;
                f.sigma = pwm.sigma;
            } catch (const std::invalid_argument&) {
            }
        }
        return f;
    };
    out.pos = try_fit(pos_exc);
    out.neg = try_fit(neg_exc);

    out.p_pos.resize(grid.size());
    out.p_neg.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto w = point_weights(t, grid[k], h, extra_weights);
        double total = 0.0, wp = 0.0, wn = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            total += w[i];
            if (residuals[i] > u_star) wp += w[i];
            if (residuals[i] < -u_star) wn += w[i];
        }
        out.p_pos[k] = total > 0.0 ? wp / total : 0.0;
        out.p_neg[k] = total > 0.0 ? wn / total : 0.0;
    }
    return out;
}

std::vector<double> recover_mean_adrf(const ADRFCurve& theta_w,
                                      const SignConditionalFits& fits) {
    const std::size_t m = theta_w.grid.size();
    if (fits.p_pos.size() != m || fits.p_neg.size() != m)
        throw std::invalid_argument("recover_mean_adrf: grid mismatch");

    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double v = theta_w.theta[k];
        bool undefined = false;
        const struct {
            double p;
            const SignSideFit* fit;
            double sign;
        } sides[2] = {{fits.p_pos[k], &fits.pos, 1.0},
                      {fits.p_neg[k], &fits.neg, -1.0}};
        for (const auto& s : sides) {
            if (s.p < kFloorProb || !s.fit->has_fit) continue;  // floor rule
            if (s.fit->xi >= 1.0) {
                undefined = true;  // active side without a finite tail mean
                break;
            }
            v += s.sign * s.p * (fits.u_star + s.fit->sigma / (1.0 - s.fit->xi));
        }
        out[k] = undefined ? kNaN : v;
    }
    return out;
}

double conditional_shortfall(double q_alpha_t, double xi, double sigma,
                             double u_star) {
    if (xi >= 1.0) return kNaN;
    return q_alpha_t + (sigma + xi * (q_alpha_t - u_star)) / (1.0 - xi);
}

std::vector<double> causal_tail_effect(std::span<const double> q_curve,
                                       std::span<const double> grid) {
    const std::size_t m = grid.size();
    if (m < 2 || q_curve.size() != m)
        throw std::invalid_argument("causal_tail_effect: need matched grid of length >= 2");
    for (std::size_t k = 1; k < m; ++k)
        if (!(grid[k] > grid[k - 1]))
            throw std::invalid_argument("causal_tail_effect: grid must be strictly increasing");

    std::vector<double> out(m);
    out[0] = (q_curve[1] - q_curve[0]) / (grid[1] - grid[0]);
    out[m - 1] = (q_curve[m - 1] - q_curve[m - 2]) / (grid[m - 1] - grid[m - 2]);
    for (std::size_t k = 1; k + 1 < m; ++k)
        out[k] = (q_curve[k + 1] - q_curve[k - 1]) / (grid[k + 1] - grid[k - 1]);
    return out;
}

ReturnLevelPoint hybrid_return_level(double theta_w_t0,
                                     std::span<const double> residuals,
                                     std::span<const double> t,
                                     const PerTTailCurve& per_t,
                                     const TailReport& global, double alpha,
                                     double t0, double h,
                                     const std::vector<double>* extra_weights) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("hybrid_return_level: alpha must be in (0, 0.5)");
    const auto w = point_weights(t, t0, h, extra_weights);
    const double n_eff = effective_n(w);

    ReturnLevelPoint out;
    if (alpha * n_eff >= 1.0) {
        out.mode = QMode::empirical;
        out.value = theta_w_t0 +
                    weighted_quantile({{residuals.begin(), residuals.end()}, w},
                                      1.0 - alpha);
        return out;
    }

    if (global.refused) {
        out.mode = QMode::refused;
        out.value = kNaN;
        return out;
    }
    double n_exc_eff = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i)
        if (std::abs(residuals[i]) > *global.u_star) n_exc_eff += w[i];

    const std::size_t k = nearest_grid_index(per_t.grid, t0);
    const ResolvedTail tail = resolve_tail_params(per_t, k, n_exc_eff, global);
    if (!tail.ok) {
        out.mode = QMode::refused;
        out.value = kNaN;
        return out;
    }
    auto resid_quantile = [&](double tau) {
        return weighted_quantile({{residuals.begin(), residuals.end()}, w}, tau);
    };
    const GpdBranchResult branch =
        gpd_branch_value(tail, alpha, n_eff, resid_quantile, global);
    if (!branch.ok) {
        out.mode = QMode::refused;
        out.value = kNaN;
        return out;
    }
    out.mode = QMode::gpd;
    out.xi_used = tail.xi;
    out.sigma_used = tail.sigma;
    out.fallback_global = tail.fallback;
    out.value = theta_w_t0 + branch.value;
    return out;
}

TailFunctionals compute_tail_functionals(const ADRFCurve& theta_w,
                                         std::span<const double> residuals,
                                         std::span<const double> t,
                                         const PerTTailCurve& per_t,
                                         const TailReport& global, double alpha,
                                         double h,
                                         const std::vector<double>* extra_weights) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("tail functionals: alpha must be in (0, 0.5)");
    const std::size_t m = theta_w.grid.size();

    TailFunctionals out;
    out.grid = theta_w.grid;
    out.q_alpha.assign(m, kNaN);
    out.q_mode.assign(m, QMode::refused);
    out.s_alpha.assign(m, kNaN);
    out.ey_recovered.assign(m, kNaN);

    // Residuals sorted once; per-point weights are permuted into value order.
    std::vector<std::size_t> order(residuals.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return residuals[a] < residuals[b];
    });
    std::vector<double> sorted_r(residuals.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted_r[i] = residuals[order[i]];

    std::vector<double> w_sorted(residuals.size());
    for (std::size_t k = 0; k < m; ++k) {
        const double t0 = theta_w.grid[k];
        const auto w = point_weights(t, t0, h, extra_weights);
        const double n_eff = effective_n(w);
        for (std::size_t i = 0; i < order.size(); ++i) w_sorted[i] = w[order[i]];

        double n_exc_eff = 0.0;
        if (!global.refused)
            for (std::size_t i = 0; i < residuals.size(); ++i)
                if (std::abs(residuals[i]) > *global.u_star) n_exc_eff += w[i];

        const ResolvedTail tail = resolve_tail_params(per_t, k, n_exc_eff, global);

        if (alpha * n_eff >= 1.0) {
            out.q_mode[k] = QMode::empirical;
            out.q_alpha[k] =
                theta_w.theta[k] +
                weighted_quantile_presorted(sorted_r, w_sorted, 1.0 - alpha);
        } else if (tail.ok) {
            auto resid_quantile = [&](double tau) {
                return weighted_quantile_presorted(sorted_r, w_sorted, tau);
            };
            const GpdBranchResult branch =
                gpd_branch_value(tail, alpha, n_eff, resid_quantile, global);
            if (branch.ok) {
                out.q_mode[k] = QMode::gpd;
                out.q_alpha[k] = theta_w.theta[k] + branch.value;
            } else {
                out.refused = true;
            }
        } else {
            out.refused = true;
        }

        // mean excess on the residual scale: the fitted thresholds live there
        if (tail.ok && std::isfinite(out.q_alpha[k])) {
            const double q_resid = out.q_alpha[k] - theta_w.theta[k];
            const double s_resid =
                conditional_shortfall(q_resid, tail.xi, tail.sigma, tail.anchor_u);
            out.s_alpha[k] = theta_w.theta[k] + s_resid;
        }
    }

    if (!global.refused) {
        const auto fits = sign_conditional_fits(residuals, t, *global.u_star,
                                                theta_w.grid, h, extra_weights);
        out.ey_recovered = recover_mean_adrf(theta_w, fits);
    } else {
        out.ey_recovered = theta_w.theta;  // no supported tail: mean reduces to the core fit
    }

    out.cte = causal_tail_effect(out.q_alpha, out.grid);
    return out;
}

}  // namespace tailadrf
