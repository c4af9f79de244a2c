#include "tailadrf/tail_threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tailadrf/gpd.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

constexpr std::uint64_t kStreamSplit = 41;
constexpr std::uint64_t kStreamBoot = 43;
constexpr double kXiScoreCap = 0.49;  // PWM identification degrades near 1/2

// Core scale of the residuals: Gaussian-consistent sigma via the MAD,
// converted to the variance-matched Laplace scale. The MAD is a bulk
// quantity (every candidate threshold sits at or above the median), so one
// scale serves the whole candidate grid.
double laplace_core_scale(std::span<const double> residuals) {
    const double sigma_core = 1.4826 * mad_about_median(residuals);
    return sigma_core / std::sqrt(2.0);
}

struct CandidateFit {
    double u;
    SpliceParams params;
    double holdout_score;
};

}  // namespace

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::frechet: return "frechet";
        case Regime::weibull: return "weibull";
        case Regime::gumbel: return "gumbel";
    }
    return "unknown";
}

PwmFit pwm_fit(std::span<const double> exceedances) {
    const std::size_t n = exceedances.size();
    if (n < 4) throw std::invalid_argument("pwm_fit: need at least 4 exceedances");
    std::vector<double> e(exceedances.begin(), exceedances.end());
    std::sort(e.begin(), e.end());
    if (!(e.front() > 0.0))
        throw std::invalid_argument("pwm_fit: exceedances must be positive");

    const double nd = static_cast<double>(n);
    double a0 = 0.0, a1 = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        const double v = e[j - 1];
        a0 += v;
        a1 += (nd - static_cast<double>(j)) / (nd - 1.0) * v;
    }
    a0 /= nd;
    a1 /= nd;

    const double denom = a0 - 2.0 * a1;
    if (!(denom > 1e-12 * a0))
        throw std::invalid_argument("pwm_fit: degenerate moment system");
    PwmFit fit;
    fit.xi = 2.0 - a0 / denom;
    fit.sigma = 2.0 * a0 * a1 / denom;
    if (!(fit.sigma > 0.0))
        throw std::invalid_argument("pwm_fit: non-positive scale");
    return fit;
}

double splice_loglik(std::span<const double> residuals, const SpliceParams& p) {
    if (residuals.empty())
        throw std::invalid_argument("splice_loglik: empty residuals");
    if (!(p.u > 0.0 && p.b > 0.0 && p.sigma > 0.0))
        throw std::invalid_argument("splice_loglik: invalid parameters");
    const double bulk_norm = 2.0 * p.b * (1.0 - std::exp(-p.u / p.b));
    const double log_bulk_mass = std::log1p(-p.p_tail);
    double total = 0.0;
    for (double r : residuals) {
        const double a = std::abs(r);
        if (a <= p.u) {
            total += log_bulk_mass - a / p.b - std::log(bulk_norm);
        } else {
            if (p.p_tail <= 0.0) return -std::numeric_limits<double>::infinity();
            total += std::log(p.p_tail / 2.0) + gpd_logpdf(a - p.u, p.xi, p.sigma);
        }
    }
    return total / static_cast<double>(residuals.size());
}

double gpd_ks_pvalue(std::span<const double> exceedances, double xi, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gpd_ks_pvalue: sigma must be > 0");
    if (exceedances.empty()) throw std::invalid_argument("gpd_ks_pvalue: empty sample");
    std::vector<double> e(exceedances.begin(), exceedances.end());
    std::sort(e.begin(), e.end());
    const double n = static_cast<double>(e.size());
    double d = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double f = gpd_cdf(e[i], xi, sigma);
        d = std::max(d, f - static_cast<double>(i) / n);
        d = std::max(d, static_cast<double>(i + 1) / n - f);
    }
    const double lambda = std::sqrt(n) * d;
    if (lambda < 0.2) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1) ? term : -term;
        if (term < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

std::array<double, 2> bootstrap_xi_ci(std::span<const double> exceedances, int B,
                                      std::uint64_t seed) {
    if (B < 50) throw std::invalid_argument("bootstrap_xi_ci: B must be >= 50");
    const std::size_t n = exceedances.size();
    if (n < 5) throw std::invalid_argument("bootstrap_xi_ci: too few exceedances");

    Rng rng(derive_seed(seed, kStreamBoot));
    std::vector<double> resample(n);
    std::vector<double> xis;
    xis.reserve(static_cast<std::size_t>(B));
    int invalid = 0;
    for (int b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < n; ++i)
            resample[i] = exceedances[rng.below(n)];
        try {
            xis.push_back(pwm_fit(resample).xi);
        } catch (const std::invalid_argument&) {
            ++invalid;
        }
    }
    if (invalid * 2 > B)
        throw std::runtime_error("bootstrap_xi_ci: more than half of resamples invalid");
    std::sort(xis.begin(), xis.end());
    return {quantile_sorted(xis, 0.05), quantile_sorted(xis, 0.95)};
}

double return_level(double u, double xi, double sigma, long n_exc, long n,
                    double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("return_level: q in (0,1)");
    if (n_exc < 1 || n < 1) throw std::invalid_argument("return_level: bad counts");
    const double ratio = static_cast<double>(n_exc) / (q * static_cast<double>(n));
    if (std::abs(xi) < 1e-6) return u + sigma * std::log(ratio);
    return u + sigma / xi * (std::pow(ratio, xi) - 1.0);
}

std::optional<ThresholdSelection> select_threshold(std::span<const double> residuals,
                                                   const ThresholdConfig& cfg) {
    const std::size_t n = residuals.size();
    if (n < 100) throw std::invalid_argument("select_threshold: need n >= 100");
    if (cfg.grid_size < 3) throw std::invalid_argument("select_threshold: J >= 3");
    if (cfg.n_min_exc < 10) throw std::invalid_argument("select_threshold: n_min_exc >= 10");

    // Seeded 50/50 split: parameters and gates on the fit half, scores on the
    // holdout half.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(cfg.seed, kStreamSplit));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.below(i + 1)]);
    const auto n_hold = static_cast<std::size_t>(
        cfg.holdout_fraction * static_cast<double>(n));
    std::vector<double> hold, fitv;
    hold.reserve(n_hold);
    fitv.reserve(n - n_hold);
    for (std::size_t i = 0; i < n; ++i)
        (i < n_hold ? hold : fitv).push_back(residuals[perm[i]]);

    std::vector<double> abs_all(n);
    for (std::size_t i = 0; i < n; ++i) abs_all[i] = std::abs(residuals[i]);
    std::sort(abs_all.begin(), abs_all.end());

    const double tau_hi =
        1.0 - static_cast<double>(cfg.n_min_exc) / static_cast<double>(n);
    if (tau_hi <= 0.5) return std::nullopt;  // sample too small for any tail
    std::vector<double> candidates;
    candidates.reserve(static_cast<std::size_t>(cfg.grid_size));
    for (int j = 0; j < cfg.grid_size; ++j) {
        const double tau =
            0.5 + (tau_hi - 0.5) * static_cast<double>(j) /
                      static_cast<double>(cfg.grid_size - 1);
        const double u = quantile_sorted(abs_all, tau);
        if (candidates.empty() || u > candidates.back()) candidates.push_back(u);
    }

    const double b = laplace_core_scale(fitv);
    if (!(b > 0.0)) return std::nullopt;

    std::optional<CandidateFit> best;
    std::vector<double> exc;
    for (double u : candidates) {
        exc.clear();
        for (double r : fitv) {
            const double a = std::abs(r);
            if (a > u) exc.push_back(a - u);
        }
        if (exc.size() < static_cast<std::size_t>(cfg.n_min_exc)) continue;
        if (exc.size() < 5) continue;

        PwmFit pwm;
        try {
            pwm = pwm_fit(exc);
        } catch (const std::invalid_argument&) {
            continue;
        }

        SpliceParams params;
        params.u = u;
        params.b = b;
        params.xi = std::min(pwm.xi, kXiScoreCap);
        params.sigma = pwm.sigma;
        params.p_tail =
            static_cast<double>(exc.size()) / static_cast<double>(fitv.size());

        if (gpd_ks_pvalue(exc, params.xi, params.sigma) < cfg.p_ks_min) continue;

        const double score = splice_loglik(hold, params);
        if (!std::isfinite(score)) continue;
        if (!best || score > best->holdout_score)
            best = CandidateFit{u, params, score};
    }
    if (!best) return std::nullopt;

    // Bulk-only Laplace null at the same core scale: refusal means the GPD
    // tail added nothing on held-out data.
    double null_score = 0.0;
    for (double r : hold) null_score += -std::abs(r) / b - std::log(2.0 * b);
    null_score /= static_cast<double>(hold.size());

    if (!(best->holdout_score > null_score)) return std::nullopt;
    return ThresholdSelection{best->u, best->params};
}

TailReport build_tail_report(std::span<const double> residuals,
                             const ThresholdConfig& cfg) {
    TailReport report;
    report.n = static_cast<long>(residuals.size());

    std::optional<ThresholdSelection> sel;
    try {
        sel = select_threshold(residuals, cfg);
    } catch (const std::invalid_argument&) {
        return report;  // sample unusable: refuse rather than abort
    }
    if (!sel) return report;

    std::vector<double> exc;
    for (double r : residuals) {
        const double a = std::abs(r);
        if (a > sel->u_star) exc.push_back(a - sel->u_star);
    }
    if (exc.size() < 5) return report;

    PwmFit pwm;
    try {
        pwm = pwm_fit(exc);
    } catch (const std::invalid_argument&) {
        return report;
    }

    std::array<double, 2> ci{};
    try {
        ci = bootstrap_xi_ci(exc, cfg.bootstrap_b, cfg.seed);
    } catch (const std::exception&) {
        return report;
    }

    report.refused = false;
    report.u_star = sel->u_star;
    report.xi_pwm = pwm.xi;
    report.sigma_pwm = pwm.sigma;
    report.xi_ci = ci;
    report.p_ks = gpd_ks_pvalue(exc, pwm.xi, pwm.sigma);
    if (ci[0] > 0.0)
        report.regime = Regime::frechet;
    else if (ci[1] < 0.0)
        report.regime = Regime::weibull;
    else
        report.regime = Regime::gumbel;
    report.n_exc = static_cast<long>(exc.size());
    for (double q : {0.01, 0.001})
        report.return_levels[q] =
            return_level(sel->u_star, pwm.xi, pwm.sigma, report.n_exc, report.n, q);
    return report;
}

}  // namespace tailadrf
