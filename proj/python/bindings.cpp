#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tailadrf/baselines.hpp"
#include "tailadrf/functionals.hpp"
#include "tailadrf/harness.hpp"
#include "tailadrf/random.hpp"
#include "tailadrf/stats.hpp"

namespace py = pybind11;
using namespace tailadrf;

namespace {

std::vector<double> to_vec(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    const auto buf = a.request();
    const double* p = static_cast<const double*>(buf.ptr);
    return {p, p + buf.size};
}

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

Sample sample_from_arrays(const py::array_t<double>& x, const py::array_t<double>& t,
                          const py::array_t<double>& y) {
    const auto xb = x.request();
    if (xb.ndim != 2) throw std::invalid_argument("x must be 2-d");
    Sample s;
    s.n = static_cast<std::size_t>(xb.shape[0]);
    s.d = static_cast<std::size_t>(xb.shape[1]);
    const auto xc = py::array_t<double, py::array::c_style | py::array::forcecast>(x);
    const double* p = xc.data();
    s.x.assign(p, p + s.n * s.d);
    s.t = to_vec(t);
    s.y = to_vec(y);
    if (s.t.size() != s.n || s.y.size() != s.n)
        throw std::invalid_argument("x, t, y must agree in length");
    return s;
}

py::dict per_t_to_dict(const PerTTailCurve& c) {
    py::dict d;
    d["grid"] = to_array(c.grid);
    d["xi"] = to_array(c.xi);
    d["sigma"] = to_array(c.sigma);
    d["u_kappa"] = to_array(c.u_kappa);
    d["anchor_kappa"] = to_array(c.anchor_kappa);
    d["cv"] = to_array(c.cv);
    py::array_t<bool> acc(static_cast<py::ssize_t>(c.accepted.size()));
    for (std::size_t i = 0; i < c.accepted.size(); ++i)
        acc.mutable_data()[i] = c.accepted[i] != 0;
    d["accepted"] = acc;
    d["globally_refused"] = c.globally_refused;
    return d;
}

py::dict report_to_dict(const TailReport& r) {
    py::dict d;
    d["refused"] = r.refused;
    if (!r.refused) {
        d["u_star"] = *r.u_star;
        d["xi_pwm"] = *r.xi_pwm;
        d["xi_ci"] = py::make_tuple((*r.xi_ci)[0], (*r.xi_ci)[1]);
        d["sigma_pwm"] = *r.sigma_pwm;
        d["p_ks"] = *r.p_ks;
        d["regime"] = regime_name(*r.regime);
        d["n_exc"] = r.n_exc;
        d["n"] = r.n;
        py::dict rl;
        for (const auto& [q, v] : r.return_levels)
            rl[py::float_(q)] = v;
        d["return_levels"] = rl;
    }
    return d;
}

py::dict functionals_to_dict(const TailFunctionals& tf) {
    py::dict d;
    d["grid"] = to_array(tf.grid);
    d["q_alpha"] = to_array(tf.q_alpha);
    py::list modes;
    for (QMode m : tf.q_mode) modes.append(q_mode_name(m));
    d["q_mode"] = modes;
    d["s_alpha"] = to_array(tf.s_alpha);
    d["cte"] = to_array(tf.cte);
    d["ey_recovered"] = to_array(tf.ey_recovered);
    d["refused"] = tf.refused;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Robust dose-response estimation with extreme-value tail diagnostics";

    m.def("structural_theta", py::vectorize(&structural_theta), py::arg("t"));

    m.def("silverman_bandwidth",
          [](const py::array_t<double>& t) { return silverman_bandwidth(to_vec(t)); },
          py::arg("t"));

    m.def("gaussian_weights",
          [](const py::array_t<double>& t, double t0, double h) {
              return to_array(gaussian_weights(to_vec(t), t0, h));
          },
          py::arg("t"), py::arg("t0"), py::arg("h"));

    m.def("weighted_quantile",
          [](const py::array_t<double>& values, const py::array_t<double>& weights,
             double tau) {
              return weighted_quantile({to_vec(values), to_vec(weights)}, tau);
          },
          py::arg("values"), py::arg("weights"), py::arg("tau"));

    m.def("effective_n",
          [](const py::array_t<double>& w) { return effective_n(to_vec(w)); },
          py::arg("weights"));

    m.def("pwm_fit",
          [](const py::array_t<double>& exceedances) {
              const PwmFit f = pwm_fit(to_vec(exceedances));
              return py::make_tuple(f.xi, f.sigma);
          },
          py::arg("exceedances"));

    m.def("generate",
          [](const std::string& dgp, double p, int n, std::uint64_t seed) {
              const Sample s = generate({dgp_from_string(dgp), p, n, seed});
              py::array_t<double> x({static_cast<py::ssize_t>(s.n),
                                     static_cast<py::ssize_t>(s.d)});
              std::copy(s.x.begin(), s.x.end(), x.mutable_data());
              py::dict d;
              d["x"] = x;
              d["t"] = to_array(s.t);
              d["y"] = to_array(s.y);
              return d;
          },
          py::arg("dgp"), py::arg("p") = 0.0, py::arg("n") = 1000,
          py::arg("seed") = 0);

    m.def("estimate_adrf",
          [](const py::array_t<double>& x, const py::array_t<double>& t,
             const py::array_t<double>& y, const std::string& loss, int grid_points,
             int folds, std::uint64_t seed) {
              const Sample s = sample_from_arrays(x, t, y);
              const double lo = *std::min_element(s.t.begin(), s.t.end());
              const double hi = *std::max_element(s.t.begin(), s.t.end());
              const LossSpec spec{loss_from_string(loss), 1.35, 0.10};
              const ADRFCurve c =
                  estimate_adrf(s, linspace(lo, hi, grid_points), spec, folds, seed);
              py::dict d;
              d["grid"] = to_array(c.grid);
              d["theta"] = to_array(c.theta);
              d["loss"] = loss_to_string(c.loss);
              d["bandwidth"] = c.bandwidth;
              return d;
          },
          py::arg("x"), py::arg("t"), py::arg("y"), py::arg("loss") = "welsch",
          py::arg("grid_points") = 25, py::arg("folds") = 3, py::arg("seed") = 0);

    m.def("build_tail_report",
          [](const py::array_t<double>& residuals, int grid_size, int n_min_exc,
             double p_ks_min, int bootstrap_b, std::uint64_t seed) {
              ThresholdConfig cfg;
              cfg.grid_size = grid_size;
              cfg.n_min_exc = n_min_exc;
              cfg.p_ks_min = p_ks_min;
              cfg.bootstrap_b = bootstrap_b;
              cfg.seed = seed;
              return report_to_dict(build_tail_report(to_vec(residuals), cfg));
          },
          py::arg("residuals"), py::arg("grid_size") = 40, py::arg("n_min_exc") = 30,
          py::arg("p_ks_min") = 0.0, py::arg("bootstrap_b") = 200,
          py::arg("seed") = 0);

    m.def("pdhte_curve",
          [](const py::array_t<double>& y, const py::array_t<double>& t,
             const py::array_t<double>& grid, std::uint64_t seed,
             std::optional<py::array_t<double>> extra_weights) {
              PDHTEConfig cfg;
              cfg.seed = seed;
              std::vector<double> extra;
              const std::vector<double>* extra_ptr = nullptr;
              if (extra_weights) {
                  extra = to_vec(*extra_weights);
                  extra_ptr = &extra;
              }
              return per_t_to_dict(
                  pdhte_curve(to_vec(y), to_vec(t), to_vec(grid), cfg, extra_ptr));
          },
          py::arg("y"), py::arg("t"), py::arg("grid"), py::arg("seed") = 0,
          py::arg("extra_weights") = std::nullopt);

    m.def("qr_quantile_curve",
          [](const py::array_t<double>& t, const py::array_t<double>& y,
             const py::array_t<double>& grid, double tau) {
              Sample s;
              s.t = to_vec(t);
              s.y = to_vec(y);
              s.n = s.t.size();
              s.d = 1;
              s.x.assign(s.n, 1.0);
              const double h = silverman_bandwidth(s.t);
              return to_array(qr_quantile_curve(s, to_vec(grid), tau, h).q_hat);
          },
          py::arg("t"), py::arg("y"), py::arg("grid"), py::arg("tau"));

    // Whole pipeline: cross-fit core, tail report, per-T shape, functionals.
    m.def("analyze",
          [](const py::array_t<double>& x, const py::array_t<double>& t,
             const py::array_t<double>& y, const std::string& loss, double alpha,
             int grid_points, int folds, std::uint64_t seed, bool gps) {
              const Sample s = sample_from_arrays(x, t, y);
              const NuisanceFit nuis =
                  crossfit_nuisances(s, folds, derive_seed(seed, 71));
              std::vector<double> stage_residuals(s.n);
              for (std::size_t i = 0; i < s.n; ++i)
                  stage_residuals[i] = s.y[i] - nuis.g_hat[i];
              const double h = silverman_bandwidth(s.t);

              std::vector<double> ts = s.t;
              std::sort(ts.begin(), ts.end());
              const double lo = gps ? quantile_sorted(ts, 0.05) : ts.front();
              const double hi = gps ? quantile_sorted(ts, 0.95) : ts.back();
              const std::vector<double> grid = linspace(lo, hi, grid_points);

              const LossSpec lspec{loss_from_string(loss), 1.35, 0.10};
              const ADRFCurve theta = adrf_from_residuals(
                  stage_residuals, s.t, grid, h, lspec, vec_mean(nuis.g_hat));
              const std::vector<double> residuals =
                  curve_residuals(s.y, s.t, theta);

              ThresholdConfig tcfg;
              tcfg.seed = derive_seed(seed, 73);
              const TailReport report = build_tail_report(residuals, tcfg);

              std::vector<double> sw;
              const std::vector<double>* extra = nullptr;
              if (gps) {
                  sw = gps_weights(s, nuis).sw;
                  extra = &sw;
              }
              PDHTEConfig pcfg;
              pcfg.seed = derive_seed(seed, 79);
              const PerTTailCurve per_t = pdhte_curve(s.y, s.t, grid, pcfg, extra);
              const TailFunctionals tf = compute_tail_functionals(
                  theta, residuals, s.t, per_t, report, alpha, h, extra);

              py::dict d;
              d["grid"] = to_array(grid);
              d["theta"] = to_array(theta.theta);
              d["tail_report"] = report_to_dict(report);
              d["per_t"] = per_t_to_dict(per_t);
              d["functionals"] = functionals_to_dict(tf);
              return d;
          },
          py::arg("x"), py::arg("t"), py::arg("y"), py::arg("loss") = "welsch",
          py::arg("alpha") = 0.01, py::arg("grid_points") = 25, py::arg("folds") = 3,
          py::arg("seed") = 0, py::arg("gps") = false);
}
