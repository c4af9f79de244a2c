#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tailadrf/dgp.hpp"
#include "tailadrf/functionals.hpp"

namespace tailadrf {

struct PanelConfig {
    std::vector<std::string> dgp_names;
    std::vector<double> contamination_levels{0.0, 0.05, 0.10, 0.20};
    std::vector<std::uint64_t> seeds;
    int n = 1000;
    int grid_points = 25;
    std::vector<double> alphas{0.01, 0.001};
    std::vector<std::string> estimators;
    int n_oracle = 100000;
    std::string output_path;
    int threads = 1;
    int bootstrap_b = 2000;
};

PanelConfig panel_config_from_json(const std::string& json_text);

struct CellResult {
    std::string dgp;
    double p = 0.0;
    std::uint64_t seed = 0;
    std::string estimator;
    double core_mae = 0.0;
    std::vector<double> q_mae;     // per alpha
    std::vector<double> alloc_err; // per alpha
    double s_mae = 0.0;
    std::string regime;
    std::string truth_regime;
    bool refused = false;
    long wall_ms = 0;
};

// One estimator's full output on one sample, aligned with the oracle grid.
struct EstimateCurves {
    std::vector<double> grid;
    std::vector<double> theta;
    std::vector<std::vector<double>> q;  // per alpha, NaN where undefined
    std::vector<double> s;               // at the first alpha
    double xi_label = 0.0;               // NaN when no label
    bool refused = false;
};

struct MetricBundle {
    double core_mae = 0.0;
    std::vector<double> q_mae;
    std::vector<double> alloc_err;
    double s_mae = 0.0;
    std::string regime;
    std::string truth_regime;
};

// Known estimator names: standard, huber, welsch, qr, rpwm; the DML-core
// names accept a "_gps" suffix for stabilized weighting.
EstimateCurves run_estimator(const std::string& name, const Sample& sample,
                             std::span<const double> grid,
                             std::span<const double> alphas, std::uint64_t seed);

MetricBundle compute_metrics(const EstimateCurves& est,
                             const std::vector<OracleCurves>& oracles,
                             std::span<const double> alphas);

std::vector<CellResult> run_panel(const PanelConfig& cfg);

void write_panel_csv(std::ostream& out, const std::vector<CellResult>& cells);

// Aggregate means plus pairwise core-MAE bootstrap comparisons, as flat JSON.
std::string panel_aggregate_json(const std::vector<CellResult>& cells,
                                 const PanelConfig& cfg);

struct RelMaeSummary {
    double mean_rel = 0.0;
    std::array<double, 2> ci90{0.0, 0.0};
    int n_pairs = 0;
};

// Paired relative difference (a - b)/b of a per-cell metric, bootstrapped
// over cells. Cells pair on (dgp, p, seed); unpaired cells throw.
RelMaeSummary bootstrap_relative_mae(const std::vector<CellResult>& a,
                                     const std::vector<CellResult>& b,
                                     const std::vector<double>& metric_a,
                                     const std::vector<double>& metric_b, int B,
                                     std::uint64_t seed);

// Convenience overload on core_mae.
RelMaeSummary bootstrap_relative_mae(const std::vector<CellResult>& a,
                                     const std::vector<CellResult>& b, int B,
                                     std::uint64_t seed);

struct ColumnMapping {
    std::vector<std::string> x_cols;  // may be empty: constant covariate
    std::string t_col = "t";
    std::string y_col = "y";
};

struct IngestResult {
    Sample sample;
    std::size_t dropped_rows = 0;
};

IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping,
                        bool log1p);

void write_sample_csv(std::ostream& out, const Sample& sample);
Sample read_sample_csv(const std::string& path);

std::string tail_report_json(const TailReport& report);

}  // namespace tailadrf
