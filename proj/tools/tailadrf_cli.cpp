#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tailadrf/baselines.hpp"
#include "tailadrf/csv.hpp"
#include "tailadrf/functionals.hpp"
#include "tailadrf/harness.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace {

using namespace tailadrf;

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
    if (path.empty()) return nullptr;
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}

std::ostream& out_or_stdout(const std::unique_ptr<std::ofstream>& f) {
    return f ? *f : std::cout;
}

std::vector<double> parse_alpha_list(const std::string& s) {
    std::vector<double> alphas;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) alphas.push_back(std::stod(item));
    if (alphas.empty()) throw std::runtime_error("empty alpha list");
    return alphas;
}

int cmd_simulate(const std::string& dgp, int n, double p, std::uint64_t seed,
                 const std::string& out_path) {
    const DGPSpec spec{dgp_from_string(dgp), p, n, seed};
    const Sample sample = generate(spec);
    auto f = open_out(out_path);
    write_sample_csv(out_or_stdout(f), sample);
    return 0;
}

int cmd_tail(const std::string& input, const ThresholdConfig& cfg,
             const std::string& out_path) {
    const CsvTable table = read_csv_file(input);
    const int rc = table.column("r");
    if (rc < 0) throw std::runtime_error("tail: input needs a single column 'r'");
    std::vector<double> residuals;
    residuals.reserve(table.rows.size());
    for (const auto& row : table.rows)
        residuals.push_back(std::stod(row[static_cast<std::size_t>(rc)]));
    const TailReport report = build_tail_report(residuals, cfg);
    auto f = open_out(out_path);
    out_or_stdout(f) << tail_report_json(report) << "\n";
    return 0;
}

struct FitOptions {
    std::string input;
    std::string loss = "welsch";
    int grid_points = 25;
    int folds = 3;
    std::uint64_t seed = 0;
    bool tail_functionals = false;
    std::string alpha_list = "0.01";
    std::string baseline;  // "", "qr", "rpwm"
    bool gps = false;
    std::string out_path;
};

void write_functionals_csv(std::ostream& out, const TailFunctionals& tf,
                           const ADRFCurve& theta) {
    write_csv_row(out, {"t", "theta_w", "ey_recovered", "q_alpha", "mode",
                        "s_alpha", "cte", "refused"});
    for (std::size_t k = 0; k < tf.grid.size(); ++k) {
        const bool row_refused = tf.q_mode[k] == QMode::refused;
        write_csv_row(out, {format_double(tf.grid[k]), format_metric(theta.theta[k]),
                            format_metric(tf.ey_recovered[k]),
                            format_metric(tf.q_alpha[k]), q_mode_name(tf.q_mode[k]),
                            format_metric(tf.s_alpha[k]), format_metric(tf.cte[k]),
                            row_refused ? "1" : "0"});
    }
}

int cmd_fit(const FitOptions& opt) {
    const Sample sample = read_sample_csv(opt.input);
    const std::vector<double> alphas = parse_alpha_list(opt.alpha_list);

    const double t_lo = *std::min_element(sample.t.begin(), sample.t.end());
    const double t_hi = *std::max_element(sample.t.begin(), sample.t.end());
    std::vector<double> grid = linspace(t_lo, t_hi, opt.grid_points);

    const double h = silverman_bandwidth(sample.t);

    if (opt.baseline == "qr") {
        auto f = open_out(opt.out_path);
        std::ostream& os = out_or_stdout(f);
        const QRCurve median_curve = qr_quantile_curve(sample, grid, 0.5, h);
        if (!opt.tail_functionals) {
            write_csv_row(os, {"t", "theta_hat"});
            for (std::size_t k = 0; k < grid.size(); ++k)
                write_csv_row(os, {format_double(grid[k]),
                                   format_double(median_curve.q_hat[k])});
            return 0;
        }
        const QRCurve q = qr_quantile_curve(sample, grid, 1.0 - alphas[0], h);
        const auto s = qr_avg_shortfall(sample, grid, alphas[0], 6, h);
        const auto cte = causal_tail_effect(q.q_hat, grid);
        write_csv_row(os, {"t", "theta_w", "ey_recovered", "q_alpha", "mode",
                           "s_alpha", "cte", "refused"});
        for (std::size_t k = 0; k < grid.size(); ++k)
            write_csv_row(os, {format_double(grid[k]),
                               format_metric(median_curve.q_hat[k]), "nan",
                               format_metric(q.q_hat[k]), "qr",
                               format_metric(s[k]), format_metric(cte[k]), "0"});
        return 0;
    }

    const LossSpec loss{loss_from_string(opt.loss), 1.35, 0.10};
    const NuisanceFit nuis =
        crossfit_nuisances(sample, opt.folds, derive_seed(opt.seed, 71));
    std::vector<double> stage_residuals(sample.n);
    for (std::size_t i = 0; i < sample.n; ++i)
        stage_residuals[i] = sample.y[i] - nuis.g_hat[i];
    const double g_mean = vec_mean(nuis.g_hat);

    const std::vector<double>* extra = nullptr;
    StabilizedWeights sw;
    if (opt.gps) {
        sw = gps_weights(sample, nuis);
        extra = &sw.sw;
        // Restrict to the adequate-overlap interior of the treatment range.
        std::vector<double> ts = sample.t;
        std::sort(ts.begin(), ts.end());
        grid = linspace(quantile_sorted(ts, 0.05), quantile_sorted(ts, 0.95),
                        opt.grid_points);
    }
    const ADRFCurve theta =
        adrf_from_residuals(stage_residuals, sample.t, grid, h, loss, g_mean);
    const std::vector<double> residuals = curve_residuals(sample.y, sample.t, theta);

    if (!opt.tail_functionals && opt.baseline.empty()) {
        auto f = open_out(opt.out_path);
        std::ostream& os = out_or_stdout(f);
        write_csv_row(os, {"t", "theta_hat"});
        for (std::size_t k = 0; k < grid.size(); ++k)
            write_csv_row(os, {format_double(grid[k]), format_double(theta.theta[k])});
        return 0;
    }

    ThresholdConfig tcfg;
    tcfg.seed = derive_seed(opt.seed, 73);
    const TailReport report = build_tail_report(residuals, tcfg);

    if (opt.baseline == "rpwm") {
        auto f = open_out(opt.out_path);
        std::ostream& os = out_or_stdout(f);
        if (report.refused) {
            write_csv_row(os, {"t", "theta_w", "ey_recovered", "q_alpha", "mode",
                               "s_alpha", "cte", "refused"});
            for (std::size_t k = 0; k < grid.size(); ++k)
                write_csv_row(os, {format_double(grid[k]),
                                   format_metric(theta.theta[k]), "nan", "nan",
                                   "refused", "nan", "nan", "1"});
            return 0;
        }
        const RpwmCurve c = residual_pwm_return_level(
            theta, residuals, sample.t, grid, alphas[0], *report.u_star,
            report.n_exc, report.n, h);
        const auto cte = causal_tail_effect(c.values, grid);
        write_csv_row(os, {"t", "theta_w", "ey_recovered", "q_alpha", "mode",
                           "s_alpha", "cte", "refused"});
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double s = conditional_shortfall(c.values[k], c.xi[k], c.sigma[k],
                                                   *report.u_star);
            write_csv_row(os, {format_double(grid[k]), format_metric(theta.theta[k]),
                               "nan", format_metric(c.values[k]), "rpwm",
                               format_metric(s), format_metric(cte[k]), "0"});
        }
        return 0;
    }

    PDHTEConfig pcfg;
    pcfg.seed = derive_seed(opt.seed, 79);
    const PerTTailCurve per_t =
        pdhte_curve(sample.y, sample.t, grid, pcfg, extra);

    if (alphas.size() > 1 && opt.out_path.empty())
        throw std::runtime_error("fit: multiple alphas need --out");
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const TailFunctionals tf = compute_tail_functionals(
            theta, residuals, sample.t, per_t, report, alphas[a], h, extra);
        std::string path = opt.out_path;
        if (a > 0) {
            const auto dot = path.rfind('.');
            const std::string stem = dot == std::string::npos ? path : path.substr(0, dot);
            const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
            path = stem + "_a" + format_metric(alphas[a]) + ext;
        }
        auto f = open_out(path);
        write_functionals_csv(out_or_stdout(f), tf, theta);
    }
    return 0;
}

int cmd_panel(const std::string& config_path, const std::string& out_path,
              int threads_override) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    PanelConfig cfg = panel_config_from_json(buf.str());
    if (!out_path.empty()) cfg.output_path = out_path;
    if (threads_override > 0) cfg.threads = threads_override;

    const auto cells = run_panel(cfg);
    auto f = open_out(cfg.output_path);
    write_panel_csv(out_or_stdout(f), cells);
    if (f) f->close();

    const std::string agg = panel_aggregate_json(cells, cfg);
    if (cfg.output_path.empty()) {
        std::cout << agg << "\n";
    } else {
        std::ofstream ja(cfg.output_path + ".agg.json", std::ios::binary);
        ja << agg << "\n";
    }
    return 0;
}

int cmd_ingest(const std::string& input, const std::string& t_col,
               const std::string& y_col, const std::string& x_cols, bool log1p,
               const std::string& out_path) {
    ColumnMapping mapping;
    mapping.t_col = t_col;
    mapping.y_col = y_col;
    if (!x_cols.empty()) {
        std::stringstream ss(x_cols);
        std::string item;
        while (std::getline(ss, item, ',')) mapping.x_cols.push_back(item);
    }
    const IngestResult res = ingest_csv(input, mapping, log1p);
    auto f = open_out(out_path);
    write_sample_csv(out_or_stdout(f), res.sample);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dose-response estimation with tail diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out_path;
    int threads = 0;
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--out", out_path, "Output path (default stdout)");
    app.add_option("--threads", threads, "Worker threads for panel runs");

    auto* sim = app.add_subcommand("simulate", "Emit a synthetic sample as CSV");
    std::string sim_dgp = "clean";
    int sim_n = 1000;
    double sim_p = 0.0;
    sim->add_option("--dgp", sim_dgp, "DGP name")->required();
    sim->add_option("--n", sim_n, "Sample size");
    sim->add_option("--p", sim_p, "Contamination level");

    auto* fit = app.add_subcommand("fit", "Estimate the dose-response curve");
    FitOptions fopt;
    fit->add_option("--input", fopt.input, "Sample CSV (x*, t, y)")->required();
    fit->add_option("--loss", fopt.loss, "l2 | huber | welsch");
    fit->add_option("--grid-points", fopt.grid_points, "Grid size");
    fit->add_option("--folds", fopt.folds, "Cross-fit folds");
    fit->add_flag("--tail-functionals", fopt.tail_functionals,
                  "Emit tail-conditional outputs");
    fit->add_option("--alpha", fopt.alpha_list, "Tail level(s), comma separated");
    fit->add_option("--baseline", fopt.baseline, "qr | rpwm");
    fit->add_flag("--gps", fopt.gps, "Stabilized propensity weighting");

    auto* tail = app.add_subcommand("tail", "Tail report from a residual CSV");
    std::string tail_input;
    ThresholdConfig tcfg;
    tail->add_option("--input", tail_input, "CSV with column 'r'")->required();
    tail->add_option("--grid-size", tcfg.grid_size, "Candidate thresholds");
    tail->add_option("--min-exc", tcfg.n_min_exc, "Exceedance floor");
    tail->add_option("--ks-min", tcfg.p_ks_min, "KS p-value gate");
    tail->add_option("--bootstrap-b", tcfg.bootstrap_b, "Bootstrap resamples");

    auto* panel = app.add_subcommand("panel", "Run a verification panel");
    std::string panel_config;
    panel->add_option("--config", panel_config, "Panel config JSON")->required();

    auto* ingest = app.add_subcommand("ingest", "Normalize an external CSV");
    std::string in_path, t_col, y_col, x_cols;
    bool log1p = false;
    ingest->add_option("--input", in_path, "Raw CSV")->required();
    ingest->add_option("--t-col", t_col, "Treatment column")->required();
    ingest->add_option("--y-col", y_col, "Outcome column")->required();
    ingest->add_option("--x-cols", x_cols, "Covariate columns, comma separated");
    ingest->add_flag("--log1p", log1p, "log(Y+1) transform the outcome");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_dgp, sim_n, sim_p, seed, out_path);
        if (fit->parsed()) {
            fopt.seed = seed;
            fopt.out_path = out_path;
            return cmd_fit(fopt);
        }
        if (tail->parsed()) {
            tcfg.seed = seed;
            return cmd_tail(tail_input, tcfg, out_path);
        }
        if (panel->parsed()) return cmd_panel(panel_config, out_path, threads);
        if (ingest->parsed())
            return cmd_ingest(in_path, t_col, y_col, x_cols, log1p, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
