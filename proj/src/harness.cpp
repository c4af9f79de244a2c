#include "tailadrf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "tailadrf/baselines.hpp"
#include "tailadrf/csv.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace tailadrf {

namespace {

using json = nlohmann::json;

const double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kStreamNuisance = 71;
constexpr std::uint64_t kStreamThreshold = 73;
constexpr std::uint64_t kStreamPdhte = 79;
constexpr std::uint64_t kOracleBase = 0x0A7ACEB15ULL;
constexpr double kRegimeTol = 0.05;
constexpr int kPanelFolds = 3;
constexpr int kQrAvgLevels = 6;
constexpr double kQrProxyAlphaBase = 0.05;

double nan_mean_abs_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) continue;
        s += std::abs(a[i] - b[i]);
        ++cnt;
    }
    return cnt > 0 ? s / static_cast<double>(cnt) : kNaN;
}

double median_defined(std::span<const double> v) {
    std::vector<double> def;
    for (double x : v)
        if (!std::isnan(x)) def.push_back(x);
    if (def.empty()) return kNaN;
    return median_of(std::move(def));
}

std::string classify_regime(double xi) {
    if (std::isnan(xi)) return "refused";
    if (xi > kRegimeTol) return "frechet";
    if (xi < -kRegimeTol) return "weibull";
    return "gumbel";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t oracle_seed_for(const std::string& dgp, double p) {
    std::uint64_t pbits;
    static_assert(sizeof(pbits) == sizeof(double));
    std::memcpy(&pbits, &p, sizeof(pbits));
    return derive_seed(kOracleBase ^ fnv1a(dgp), pbits);
}

struct CoreOutput {
    ADRFCurve theta;
    std::vector<double> residuals;  // y - theta_W(t): full-model residuals
    NuisanceFit nuisance;
    TailReport report;
    double h = 0.0;
};

CoreOutput run_core(const Sample& sample, LossKind kind,
                    std::span<const double> grid, std::uint64_t seed) {
    CoreOutput out;
    out.nuisance = crossfit_nuisances(sample, kPanelFolds,
                                      derive_seed(seed, kStreamNuisance));
    std::vector<double> r_stage(sample.n);
    for (std::size_t i = 0; i < sample.n; ++i)
        r_stage[i] = sample.y[i] - out.nuisance.g_hat[i];
    out.h = silverman_bandwidth(sample.t);
    LossSpec loss;
    loss.kind = kind;
    out.theta = adrf_from_residuals(r_stage, sample.t, {grid.begin(), grid.end()},
                                    out.h, loss, vec_mean(out.nuisance.g_hat));
    out.residuals = curve_residuals(sample.y, sample.t, out.theta);
    ThresholdConfig tcfg;
    tcfg.seed = derive_seed(seed, kStreamThreshold);
    out.report = build_tail_report(out.residuals, tcfg);
    return out;
}

}  // namespace

PanelConfig panel_config_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    PanelConfig cfg;
    cfg.dgp_names = j.at("dgp_names").get<std::vector<std::string>>();
    if (j.contains("contamination_levels"))
        cfg.contamination_levels = j["contamination_levels"].get<std::vector<double>>();
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.n = j.value("n", 1000);
    cfg.grid_points = j.value("grid_points", 25);
    if (j.contains("alphas")) cfg.alphas = j["alphas"].get<std::vector<double>>();
    cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
    cfg.n_oracle = j.value("n_oracle", 100000);
    cfg.output_path = j.value("output_path", std::string{});
    cfg.threads = j.value("threads", 1);
    cfg.bootstrap_b = j.value("bootstrap_b", 2000);
    if (cfg.dgp_names.empty() || cfg.seeds.empty() || cfg.estimators.empty() ||
        cfg.contamination_levels.empty() || cfg.alphas.empty())
        throw std::invalid_argument("panel config: empty list");
    if (cfg.n < 200) throw std::invalid_argument("panel config: n must be >= 200");
    return cfg;
}

EstimateCurves run_estimator(const std::string& name, const Sample& sample,
                             std::span<const double> grid,
                             std::span<const double> alphas, std::uint64_t seed) {
    EstimateCurves out;
    out.grid.assign(grid.begin(), grid.end());
    out.xi_label = kNaN;

    std::string base = name;
    bool gps = false;
    if (base.size() > 4 && base.substr(base.size() - 4) == "_gps") {
        gps = true;
        base = base.substr(0, base.size() - 4);
    }

    if (base == "qr") {
        const double h = silverman_bandwidth(sample.t);
        out.theta = qr_quantile_curve(sample, grid, 0.5, h).q_hat;
        for (double a : alphas)
            out.q.push_back(qr_quantile_curve(sample, grid, 1.0 - a, h).q_hat);
        out.s = qr_avg_shortfall(sample, grid, alphas[0], kQrAvgLevels, h);
        out.xi_label =
            median_defined(qr_xi_proxy(sample, grid, kQrProxyAlphaBase, h));
        return out;
    }

    if (base == "rpwm") {
        const CoreOutput core = run_core(sample, LossKind::welsch, grid, seed);
        out.theta = core.theta.theta;
        if (core.report.refused) {
            out.refused = true;
            for (std::size_t a = 0; a < alphas.size(); ++a)
                out.q.emplace_back(grid.size(), kNaN);
            out.s.assign(grid.size(), kNaN);
            return out;
        }
        std::vector<double> xi_pts;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            const RpwmCurve c = residual_pwm_return_level(
                core.theta, core.residuals, sample.t, grid, alphas[a],
                *core.report.u_star, core.report.n_exc, core.report.n, core.h);
            out.q.push_back(c.values);
            if (a == 0) {
                out.s.resize(grid.size());
                for (std::size_t k = 0; k < grid.size(); ++k)
                    out.s[k] = conditional_shortfall(c.values[k], c.xi[k],
                                                     c.sigma[k], *core.report.u_star);
                xi_pts = c.xi;
            }
        }
        out.xi_label = median_defined(xi_pts);
        return out;
    }

    const LossKind kind = loss_from_string(base);
    const CoreOutput core = run_core(sample, kind, grid, seed);
    out.theta = core.theta.theta;

    const std::vector<double>* extra = nullptr;
    StabilizedWeights sw;
    if (gps) {
        sw = gps_weights(sample, core.nuisance);
        extra = &sw.sw;
    }
    PDHTEConfig pcfg;
    pcfg.seed = derive_seed(seed, kStreamPdhte);
    const PerTTailCurve per_t = pdhte_curve(sample.y, sample.t, grid, pcfg, extra);

    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const TailFunctionals tf =
            compute_tail_functionals(core.theta, core.residuals, sample.t, per_t,
                                     core.report, alphas[a], core.h, extra);
        out.q.push_back(tf.q_alpha);
        out.refused = out.refused || tf.refused;
        if (a == 0) out.s = tf.s_alpha;
    }
    if (!per_t.globally_refused) out.xi_label = median_defined(per_t.xi);
    return out;
}

MetricBundle compute_metrics(const EstimateCurves& est,
                             const std::vector<OracleCurves>& oracles,
                             std::span<const double> alphas) {
    if (oracles.size() != alphas.size() || oracles.empty())
        throw std::invalid_argument("compute_metrics: oracle/alpha mismatch");
    for (const auto& oc : oracles)
        if (oc.grid.size() != est.grid.size())
            throw std::invalid_argument("compute_metrics: grid mismatch");

    MetricBundle m;
    m.core_mae = nan_mean_abs_diff(est.theta, oracles[0].theta);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        m.q_mae.push_back(nan_mean_abs_diff(est.q[a], oracles[a].q_alpha));

        // Allocation regret: pick the treatment minimizing the estimated
        // extreme outcome, score it on the oracle curve, normalize by range.
        const auto& qo = oracles[a].q_alpha;
        double best_est = std::numeric_limits<double>::infinity();
        std::size_t k_est = est.grid.size();
        for (std::size_t k = 0; k < est.grid.size(); ++k) {
            if (std::isnan(est.q[a][k])) continue;
            if (est.q[a][k] < best_est) {
                best_est = est.q[a][k];
                k_est = k;
            }
        }
        if (k_est == est.grid.size()) {
            m.alloc_err.push_back(kNaN);
        } else {
            const std::size_t k_opt = static_cast<std::size_t>(
                std::min_element(qo.begin(), qo.end()) - qo.begin());
            const double range = *std::max_element(qo.begin(), qo.end()) - qo[k_opt];
            m.alloc_err.push_back(range > 0.0 ? (qo[k_est] - qo[k_opt]) / range : 0.0);
        }
    }
    m.s_mae = nan_mean_abs_diff(est.s, oracles[0].s_alpha);
    m.regime = classify_regime(est.xi_label);
    m.truth_regime = classify_regime(median_defined(oracles[0].xi_true));
    return m;
}

std::vector<CellResult> run_panel(const PanelConfig& cfg) {
    struct CellKey {
        std::string dgp;
        double p;
        std::uint64_t seed;
        std::string estimator;
    };
    std::vector<CellKey> keys;
    for (const auto& dgp : cfg.dgp_names)
        for (double p : cfg.contamination_levels)
            for (std::uint64_t seed : cfg.seeds)
                for (const auto& est : cfg.estimators)
                    keys.push_back({dgp, p, seed, est});

    // Shared oracle per (dgp, p), seeded independently of the cells.
    const std::vector<double> grid = linspace(-2.0, 2.0, cfg.grid_points);
    std::map<std::pair<std::string, double>, std::vector<OracleCurves>> oracle;
    for (const auto& dgp : cfg.dgp_names)
        for (double p : cfg.contamination_levels) {
            DGPSpec spec{dgp_from_string(dgp), p, cfg.n, 0};
            oracle[{dgp, p}] = oracle_curves_multi(
                spec, grid, cfg.alphas, cfg.n_oracle, oracle_seed_for(dgp, p));
        }

    std::vector<CellResult> cells(keys.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= keys.size()) return;
            const auto& key = keys[i];
            CellResult& cell = cells[i];
            cell.dgp = key.dgp;
            cell.p = key.p;
            cell.seed = key.seed;
            cell.estimator = key.estimator;
            const auto start = std::chrono::steady_clock::now();
            try {
                const DGPSpec spec{dgp_from_string(key.dgp), key.p, cfg.n, key.seed};
                const Sample sample = generate(spec);
                const EstimateCurves est =
                    run_estimator(key.estimator, sample, grid, cfg.alphas, key.seed);
                const MetricBundle m =
                    compute_metrics(est, oracle.at({key.dgp, key.p}), cfg.alphas);
                cell.core_mae = m.core_mae;
                cell.q_mae = m.q_mae;
                cell.alloc_err = m.alloc_err;
                cell.s_mae = m.s_mae;
                cell.regime = m.regime;
                cell.truth_regime = m.truth_regime;
                cell.refused = est.refused;
            } catch (const std::exception& e) {
                cell.core_mae = kNaN;
                cell.q_mae.assign(cfg.alphas.size(), kNaN);
                cell.alloc_err.assign(cfg.alphas.size(), kNaN);
                cell.s_mae = kNaN;
                cell.regime = "error";
                cell.truth_regime = "";
                cell.refused = true;
                std::cerr << "panel cell failed (" << key.dgp << ", p=" << key.p
                          << ", seed=" << key.seed << ", " << key.estimator
                          << "): " << e.what() << "\n";
            }
            cell.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
        }
    };

    const int n_threads = std::max(1, cfg.threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return cells;
}

void write_panel_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    write_csv_row(out, {"dgp", "p", "seed", "estimator", "core_mae", "q_mae_001",
                        "q_mae_0001", "alloc_001", "alloc_0001", "s_mae", "regime",
                        "truth_regime", "refused", "wall_ms"});
    for (const auto& c : cells) {
        auto metric_at = [&](const std::vector<double>& v, std::size_t i) {
            return i < v.size() ? format_metric(v[i]) : std::string("nan");
        };
        write_csv_row(out, {c.dgp, format_metric(c.p), std::to_string(c.seed),
                            c.estimator, format_metric(c.core_mae),
                            metric_at(c.q_mae, 0), metric_at(c.q_mae, 1),
                            metric_at(c.alloc_err, 0), metric_at(c.alloc_err, 1),
                            format_metric(c.s_mae), c.regime, c.truth_regime,
                            c.refused ? "1" : "0", std::to_string(c.wall_ms)});
    }
}

RelMaeSummary bootstrap_relative_mae(const std::vector<CellResult>& a,
                                     const std::vector<CellResult>& b,
                                     const std::vector<double>& metric_a,
                                     const std::vector<double>& metric_b, int B,
                                     std::uint64_t seed) {
    if (a.size() != metric_a.size() || b.size() != metric_b.size())
        throw std::invalid_argument("bootstrap_relative_mae: metric size mismatch");
    auto key_of = [](const CellResult& c) {
        std::ostringstream os;
        os << c.dgp << '|' << c.p << '|' << c.seed;
        return os.str();
    };
    std::map<std::string, double> b_by_key;
    for (std::size_t i = 0; i < b.size(); ++i) b_by_key[key_of(b[i])] = metric_b[i];

    std::vector<double> rel;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto it = b_by_key.find(key_of(a[i]));
        if (it == b_by_key.end())
            throw std::invalid_argument("bootstrap_relative_mae: unpaired cell " +
                                        key_of(a[i]));
        const double ma = metric_a[i], mb = it->second;
        if (std::isnan(ma) || std::isnan(mb)) continue;  // refusals drop the pair
        if (mb == 0.0) {
            if (ma == 0.0) rel.push_back(0.0);
            continue;
        }
        rel.push_back((ma - mb) / mb);
    }
    if (rel.empty())
        throw std::invalid_argument("bootstrap_relative_mae: no usable pairs");

    RelMaeSummary out;
    out.n_pairs = static_cast<int>(rel.size());
    out.mean_rel = vec_mean(rel);
    if (B < 50)
        std::cerr << "bootstrap_relative_mae: B=" << B
                  << " gives a degenerate confidence interval\n";

    Rng rng(derive_seed(seed, 0xB00F));
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(B));
    for (int r = 0; r < B; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < rel.size(); ++i) s += rel[rng.below(rel.size())];
        means.push_back(s / static_cast<double>(rel.size()));
    }
    std::sort(means.begin(), means.end());
    out.ci90 = {quantile_sorted(means, 0.05), quantile_sorted(means, 0.95)};
    return out;
}

RelMaeSummary bootstrap_relative_mae(const std::vector<CellResult>& a,
                                     const std::vector<CellResult>& b, int B,
                                     std::uint64_t seed) {
    std::vector<double> ma, mb;
    for (const auto& c : a) ma.push_back(c.core_mae);
    for (const auto& c : b) mb.push_back(c.core_mae);
    return bootstrap_relative_mae(a, b, ma, mb, B, seed);
}

std::string panel_aggregate_json(const std::vector<CellResult>& cells,
                                 const PanelConfig& cfg) {
    json agg;
    std::map<std::string, std::vector<const CellResult*>> by_est;
    for (const auto& c : cells) by_est[c.estimator].push_back(&c);

    auto nan_mean = [](const std::vector<double>& v) {
        double s = 0.0;
        std::size_t cnt = 0;
        for (double x : v)
            if (!std::isnan(x)) {
                s += x;
                ++cnt;
            }
        return cnt > 0 ? s / static_cast<double>(cnt) : kNaN;
    };

    for (const auto& [name, list] : by_est) {
        std::vector<double> core, s_mae;
        std::vector<std::vector<double>> q(cfg.alphas.size());
        int refused = 0;
        for (const auto* c : list) {
            core.push_back(c->core_mae);
            s_mae.push_back(c->s_mae);
            for (std::size_t ai = 0; ai < cfg.alphas.size() && ai < c->q_mae.size(); ++ai)
                q[ai].push_back(c->q_mae[ai]);
            refused += c->refused ? 1 : 0;
        }
        json je;
        je["cells"] = list.size();
        je["refused"] = refused;
        je["mean_core_mae"] = nan_mean(core);
        je["mean_s_mae"] = nan_mean(s_mae);
        for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
            std::ostringstream key;
            key << "mean_q_mae_alpha_" << cfg.alphas[ai];
            je[key.str()] = nan_mean(q[ai]);
        }
        agg["per_estimator"][name] = je;
    }

    json pairs = json::array();
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) {
        for (std::size_t j = i + 1; j < cfg.estimators.size(); ++j) {
            std::vector<CellResult> a, b;
            for (const auto& c : cells) {
                if (c.estimator == cfg.estimators[i]) a.push_back(c);
                if (c.estimator == cfg.estimators[j]) b.push_back(c);
            }
            if (a.empty() || b.empty()) continue;
            try {
                const RelMaeSummary s =
                    bootstrap_relative_mae(a, b, cfg.bootstrap_b, 0xA66);
                pairs.push_back({{"a", cfg.estimators[i]},
                                 {"b", cfg.estimators[j]},
                                 {"metric", "core_mae"},
                                 {"mean_rel", s.mean_rel},
                                 {"ci90_lo", s.ci90[0]},
                                 {"ci90_hi", s.ci90[1]},
                                 {"n_pairs", s.n_pairs}});
            } catch (const std::exception& e) {
                std::cerr << "aggregate bootstrap skipped: " << e.what() << "\n";
            }
        }
    }
    agg["pairwise_core_mae"] = pairs;
    return agg.dump(2);
}

IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping,
                        bool log1p) {
    const CsvTable table = read_csv_file(path);

    const int tc = table.column(mapping.t_col);
    const int yc = table.column(mapping.y_col);
    if (tc < 0) throw std::runtime_error("ingest: missing treatment column '" +
                                         mapping.t_col + "'");
    if (yc < 0) throw std::runtime_error("ingest: missing outcome column '" +
                                         mapping.y_col + "'");
    std::vector<int> xcols;
    for (const auto& name : mapping.x_cols) {
        const int c = table.column(name);
        if (c < 0) throw std::runtime_error("ingest: missing covariate column '" +
                                            name + "'");
        xcols.push_back(c);
    }
    const bool constant_x = xcols.empty();
    if (constant_x)
        std::cerr << "ingest: no covariate columns mapped, using a constant column\n";

    auto parse_cell = [](const std::string& s, double& out) {
        if (s.empty()) return false;  // missing value
        std::size_t pos = 0;
        try {
            out = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("ingest: non-numeric value '" + s + "'");
        }
        if (pos != s.size())
            throw std::runtime_error("ingest: non-numeric value '" + s + "'");
        return true;
    };

    IngestResult out;
    Sample& s = out.sample;
    s.d = constant_x ? 1 : xcols.size();
    std::vector<double> xrow(s.d);
    for (const auto& row : table.rows) {
        bool ok = true;
        double t = 0.0, y = 0.0;
        ok = ok && static_cast<std::size_t>(tc) < row.size() && parse_cell(row[tc], t);
        ok = ok && static_cast<std::size_t>(yc) < row.size() && parse_cell(row[yc], y);
        if (constant_x) {
            xrow[0] = 1.0;
        } else {
            for (std::size_t j = 0; j < xcols.size() && ok; ++j)
                ok = static_cast<std::size_t>(xcols[j]) < row.size() &&
                     parse_cell(row[static_cast<std::size_t>(xcols[j])], xrow[j]);
        }
        if (!ok) {
            ++out.dropped_rows;
            continue;
        }
        s.t.push_back(t);
        s.y.push_back(log1p ? std::log1p(y) : y);
        for (double v : xrow) s.x.push_back(v);
    }
    s.n = s.t.size();
    if (out.dropped_rows > 0)
        std::cerr << "ingest: dropped " << out.dropped_rows
                  << " rows with missing values\n";
    return out;
}

void write_sample_csv(std::ostream& out, const Sample& sample) {
    std::vector<std::string> header;
    for (std::size_t j = 0; j < sample.d; ++j)
        header.push_back("x" + std::to_string(j));
    header.push_back("t");
    header.push_back("y");
    write_csv_row(out, header);
    std::vector<std::string> row(sample.d + 2);
    for (std::size_t i = 0; i < sample.n; ++i) {
        for (std::size_t j = 0; j < sample.d; ++j)
            row[j] = format_double(sample.x_at(i, j));
        row[sample.d] = format_double(sample.t[i]);
        row[sample.d + 1] = format_double(sample.y[i]);
        write_csv_row(out, row);
    }
}

Sample read_sample_csv(const std::string& path) {
    const CsvTable table = read_csv_file(path);
    const int tc = table.column("t");
    const int yc = table.column("y");
    if (tc < 0 || yc < 0)
        throw std::runtime_error("sample csv: required columns 't' and 'y'");
    std::vector<int> xcols;
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (static_cast<int>(i) != tc && static_cast<int>(i) != yc)
            xcols.push_back(static_cast<int>(i));

    Sample s;
    s.d = xcols.empty() ? 1 : xcols.size();
    for (const auto& row : table.rows) {
        s.t.push_back(std::stod(row[static_cast<std::size_t>(tc)]));
        s.y.push_back(std::stod(row[static_cast<std::size_t>(yc)]));
        if (xcols.empty()) {
            s.x.push_back(1.0);
        } else {
            for (int c : xcols)
                s.x.push_back(std::stod(row[static_cast<std::size_t>(c)]));
        }
    }
    s.n = s.t.size();
    return s;
}

std::string tail_report_json(const TailReport& report) {
    json j;
    j["refused"] = report.refused;
    if (!report.refused) {
        j["u_star"] = *report.u_star;
        j["xi_pwm"] = *report.xi_pwm;
        j["xi_ci_low"] = (*report.xi_ci)[0];
        j["xi_ci_high"] = (*report.xi_ci)[1];
        j["sigma_pwm"] = *report.sigma_pwm;
        j["p_ks"] = *report.p_ks;
        j["regime"] = regime_name(*report.regime);
        j["n_exc"] = report.n_exc;
        j["n"] = report.n;
        for (const auto& [q, rl] : report.return_levels) {
            std::ostringstream key;
            key << "return_level_" << q;
            j[key.str()] = rl;
        }
    }
    return j.dump(2);
}

}  // namespace tailadrf
