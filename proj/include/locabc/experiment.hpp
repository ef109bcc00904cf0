#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "locabc/config.hpp"
#include "locabc/inference.hpp"
#include "locabc/models.hpp"
#include "locabc/table_io.hpp"

namespace locabc {

/// One (test dataset, method) outcome. Non-applicable fields are NaN / 0.
struct ReportRow {
  std::size_t test_id = 0;
  MethodId method = MethodId::Reg;
  std::size_t n_sims = 0;
  std::size_t n_summaries = 0;
  bool ok = false;
  double srmse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> rmse;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t initial_components = 0;
  std::size_t local_components = 0;
  bool warning = false;
  std::string error;
  double seconds = 0.0;  // wall time, kept out of report.csv
};

/// One grid point of one optimized run.
struct DiagnosticRow {
  std::size_t test_id = 0;
  MethodId method = MethodId::localRegopt;
  std::size_t grid_index = 0;
  TransformationParams params;
  bool feasible = false;
  bool chosen = false;
  double srmse_total = std::numeric_limits<double>::quiet_NaN();
};

struct GlobalFitTiming {
  std::string name;
  double seconds = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> param_names;
  std::vector<ReportRow> rows;  // test-major, methods in config order
  std::vector<DiagnosticRow> diagnostics;
  std::vector<GlobalFitTiming> global_fits;
  std::size_t table_failures = 0;  // simulator failures redrawn while building the table
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// A global transformation fitted once per experiment, or the reason it could not be.
struct CachedFit {
  std::optional<LinearTransformation> t;
  std::string error;

  const LinearTransformation& get() const {
    if (!t) throw Error(error);
    return *t;
  }
};

template <class F>
CachedFit timed_fit(const std::string& name, std::vector<GlobalFitTiming>& timings, F&& fit) {
  CachedFit out;
  const auto start = std::chrono::steady_clock::now();
  try {
    out.t = fit();
  } catch (const std::exception& e) {
    out.error = name + ": " + e.what();
  }
  timings.push_back({name, seconds_since(start)});
  return out;
}

inline bool uses(const ExperimentConfig& c, std::initializer_list<MethodId> ms) {
  for (MethodId m : c.methods)
    for (MethodId x : ms)
      if (m == x) return true;
  return false;
}

}  // namespace detail

/// Simulates the reference table and test datasets, or loads them when paths are set.
struct ExperimentData {
  SimulationTable table;
  SimulationTable tests;
  std::size_t table_failures = 0;
};

inline ExperimentData prepare_data(const ExperimentConfig& c) {
  TableBuildStats stats;
  SimulationTable table = c.table_path.empty()
                              ? simulate_table(c.model, c.effective_prior(), c.n_sims, c.seed, c.opt.threads, &stats)
                              : load_table(c.table_path);
  SimulationTable tests =
      c.test_data_path.empty()
          ? simulate_test_datasets(c.model, test_parameters(c.model.kind, c.effective_prior(), c.n_test, c.test_params),
                                   c.seed, c.opt.threads)
          : load_table(c.test_data_path);
  if (tests.param_dim() != table.param_dim() || tests.summary_dim() != table.summary_dim()) {
    throw DimensionError("experiment: test datasets do not match the table dimensions");
  }
  return ExperimentData{std::move(table), std::move(tests), stats.failures};
}

/// Runs every configured method on every test dataset of `data`.
///
/// Reg and PLS are fitted on the full table; PLS picks its component count
/// by cross-validation. localReg and localPLS localize with alpha =
/// local_alpha around the global fit (localPLS re-selects its local
/// component count by CV on the neighbourhood). The optimized variants use
/// the global regression, or the PLS fit with the most components, to pick
/// validation datasets. Final posteriors keep the n_final nearest rows.
inline ExperimentReport run_experiment(const ExperimentConfig& c, const ExperimentData& data) {
  c.validate();
  ExperimentReport report;
  report.table_failures = data.table_failures;
  report.param_names = data.table.meta().param_names;

  const AnalysisTable table(data.table);
  const std::size_t n = table.n_sims();
  const std::size_t q = table.summary_dim();
  const std::size_t raw_q = data.table.summary_dim();
  const auto all = detail::all_rows(n);

  using detail::CachedFit;
  CachedFit reg, pls_cv, pls_max;
  std::size_t pls_available = 0;
  if (detail::uses(c, {MethodId::Reg, MethodId::localReg, MethodId::localRegopt})) {
    reg = detail::timed_fit("Reg", report.global_fits, [&] {
      return make_global_transformation({Method::regression, 0, c.pls, 0}, table);
    });
  }
  if (detail::uses(c, {MethodId::PLS, MethodId::localPLS})) {
    pls_cv = detail::timed_fit("PLS", report.global_fits, [&] {
      return make_global_transformation({Method::pls, 0, c.pls, derive_seed(c.seed, Stream::cv_folds, 0)}, table);
    });
  }
  if (detail::uses(c, {MethodId::PLSopt, MethodId::localPLSopt})) {
    pls_max = detail::timed_fit("PLS_max", report.global_fits, [&] {
      const std::size_t cap = std::min(c.pls.max_components, max_pls_components(n, q));
      if (cap < 1) throw TooFewSamplesError("table too small for PLS");
      Moments m = Moments::around_row(table.summaries(), table.params(), 0);
      m.add(table.summaries(), table.params(), all);
      const SimplsFit fit = simpls_moments(m, cap);
      if (fit.components() < 1) throw DomainError("PLS found no components");
      LinearTransformation t = pls_transformation(fit, fit.components(), all);
      t.set_preprocessor_id(table.preprocessor().fingerprint());
      return t;
    });
    if (pls_max.t) pls_available = pls_max.t->n_components();
  }

  const double local_alpha = c.effective_local_alpha(n);
  std::vector<std::size_t> comp_grid;
  for (auto k : c.pls_components_grid)
    if (k <= pls_available) comp_grid.push_back(k);

  const std::size_t n_test = data.tests.n_sims();
  const std::size_t n_methods = c.methods.size();
  report.rows.resize(n_test * n_methods);
  std::vector<std::vector<DiagnosticRow>> diag_per_test(n_test);

  OptimizationConfig opt = c.opt;
  if (c.test_threads > 1) opt.threads = 1;

  parallel_for(n_test, c.test_threads, [&](std::size_t k) {
    const auto truth = data.tests.param_row(static_cast<Eigen::Index>(k));
    std::optional<PreprocessedSummary> obs;
    std::string obs_error;
    try {
      obs = table.preprocessor().apply(data.tests.summary_row(static_cast<Eigen::Index>(k)));
    } catch (const std::exception& e) {
      obs_error = e.what();
    }

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      ReportRow& row = report.rows[k * n_methods + mi];
      row.test_id = k;
      row.method = c.methods[mi];
      row.n_sims = n;
      row.n_summaries = raw_q;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (!obs) throw DomainError(obs_error);
        row.warning = obs->warning;
        const auto s_obs = as_span(obs->values);
        const auto record_opt = [&](const OptimizedProjection& op) {
          for (std::size_t g = 0; g < op.diagnostics.surface.size(); ++g) {
            const auto& r = op.diagnostics.surface[g];
            diag_per_test[k].push_back(
                {k, row.method, g, r.params, r.feasible, g == op.diagnostics.chosen_index, r.srmse_total});
          }
          row.alpha = op.chosen.alpha;
          if (op.chosen.method == Method::pls) {
            row.initial_components = op.chosen.initial_components;
            row.local_components = op.chosen.local_components;
          }
        };

        LinearTransformation t = LinearTransformation::identity(q);
        switch (row.method) {
          case MethodId::Reg:
            t = reg.get();
            row.alpha = 1.0;
            break;
          case MethodId::PLS:
            t = pls_cv.get();
            row.alpha = 1.0;
            row.local_components = t.n_components();
            break;
          case MethodId::localReg:
            t = local_projection(reg.get(), {local_alpha, Method::regression, 0, 0}, s_obs, table);
            row.alpha = local_alpha;
            break;
          case MethodId::localPLS: {
            const auto& f1 = pls_cv.get();
            const IndexSet nb = local_neighborhood(f1, local_alpha, s_obs, table);
            PlsSelection sel = c.pls;
            sel.max_components = std::min(sel.max_components, max_pls_components(nb.size(), q));
            sel.folds = std::min(sel.folds, nb.size());
            const std::size_t comps = select_pls_components(table.summaries(), table.params(), nb.indices(), sel,
                                                            derive_seed(c.seed, Stream::cv_folds, 1 + k));
            t = fit_local({local_alpha, Method::pls, comps, f1.n_components()}, nb, table);
            row.alpha = local_alpha;
            row.initial_components = f1.n_components();
            row.local_components = comps;
            break;
          }
          case MethodId::localRegopt: {
            const auto& f = reg.get();
            const auto op = local_projection_optimized(
                f, [&](const TransformationParams&) { return f; }, regression_grid(c.alpha_grid), opt, s_obs, table);
            record_opt(op);
            t = op.transformation;
            break;
          }
          case MethodId::PLSopt: {
            const auto& fv = pls_max.get();
            if (comp_grid.empty()) throw ArgumentError("no component count in the grid is available");
            const auto op = local_projection_optimized(
                fv, [&](const TransformationParams&) { return fv; }, pls_grid({1.0}, {1}, comp_grid), opt, s_obs,
                table);
            record_opt(op);
            row.initial_components = 0;
            t = op.transformation;
            break;
          }
          case MethodId::localPLSopt: {
            const auto& fv = pls_max.get();
            if (comp_grid.empty()) throw ArgumentError("no component count in the grid is available");
            const auto op = local_projection_optimized(
                fv, [&](const TransformationParams& p) { return fv.truncated(p.initial_components); },
                pls_grid(c.alpha_grid, comp_grid, comp_grid), opt, s_obs, table);
            record_opt(op);
            t = op.transformation;
            break;
          }
        }
        const PosteriorSample post = rejection_abc(table, t, s_obs, c.opt.n_final);
        const Vector r = rmse_by_param(post.params, truth);
        row.rmse.assign(r.data(), r.data() + r.size());
        row.srmse = r.sum();
        row.ok = std::isfinite(row.srmse);
        if (!row.ok) row.error = "non-finite SRMSE";
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      row.seconds = detail::seconds_since(start);
    }
  });

  for (auto& d : diag_per_test)
    for (auto& r : d) report.diagnostics.push_back(std::move(r));
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& c) { return run_experiment(c, prepare_data(c)); }

}  // namespace locabc
