#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locabc/core.hpp"
#include "locabc/moments.hpp"
#include "locabc/projections.hpp"
#include "locabc/summaries.hpp"

namespace locabc {

/// A simulation table after preprocessing: standardized summaries (N x q') and parameters (N x d).
class AnalysisTable {
 public:
  AnalysisTable(const SimulationTable& table, Preprocessor prep)
      : prep_(std::move(prep)), summaries_(prep_.apply_all(table.summaries())), params_(table.params()) {}

  explicit AnalysisTable(const SimulationTable& table) : AnalysisTable(table, Preprocessor::fit(table)) {}

  /// Already-preprocessed data; the preprocessor is whatever produced `summaries`.
  AnalysisTable(Matrix summaries, Matrix params, Preprocessor prep)
      : prep_(std::move(prep)), summaries_(std::move(summaries)), params_(std::move(params)) {
    if (summaries_.rows() != params_.rows() || summaries_.rows() < 1) {
      throw DimensionError("analysis table: row counts differ or empty");
    }
  }

  std::size_t n_sims() const noexcept { return static_cast<std::size_t>(params_.rows()); }
  std::size_t summary_dim() const noexcept { return static_cast<std::size_t>(summaries_.cols()); }
  std::size_t param_dim() const noexcept { return static_cast<std::size_t>(params_.cols()); }
  const Matrix& summaries() const noexcept { return summaries_; }
  const Matrix& params() const noexcept { return params_; }
  const Preprocessor& preprocessor() const noexcept { return prep_; }
  std::span<const double> summary_row(std::size_t i) const { return row_span(summaries_, static_cast<Eigen::Index>(i)); }
  std::span<const double> param_row(std::size_t i) const { return row_span(params_, static_cast<Eigen::Index>(i)); }

 private:
  Preprocessor prep_;
  Matrix summaries_;
  Matrix params_;
};

// ---------------------------------------------------------------------------
// Rejection ABC and accuracy

struct PosteriorSample {
  IndexSet indices;
  Matrix params;  // rows of the table at `indices`, same order
};

inline PosteriorSample gather_posterior(const Matrix& params, IndexSet indices) {
  PosteriorSample out;
  out.params.resize(static_cast<Eigen::Index>(indices.size()), params.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.params.row(static_cast<Eigen::Index>(k)) = params.row(static_cast<Eigen::Index>(indices[k]));
  }
  out.indices = std::move(indices);
  return out;
}

/// Accepts the `n_accept` simulations nearest to `s_obs` after transformation `t`.
///
/// `s_obs` must already be preprocessed with the table's preprocessor. Rows
/// in `exclude` are never accepted.
inline PosteriorSample rejection_abc(const AnalysisTable& table, const LinearTransformation& t,
                                     std::span<const double> s_obs, std::size_t n_accept,
                                     std::span<const std::size_t> exclude = {}) {
  const Matrix projected = t.apply_rows(table.summaries());
  const Vector target = t.apply(s_obs);
  const auto dist = squared_distances_to(projected, as_span(target));
  return gather_posterior(table.params(), select_k_nearest(dist, n_accept, exclude));
}

/// sqrt(mean((samples - truth)^2)).
inline double rmse(std::span<const double> samples, double truth) {
  if (samples.empty()) throw ArgumentError("rmse: empty sample");
  double acc = 0.0;
  for (double v : samples) acc += (v - truth) * (v - truth);
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

/// Per-parameter RMSE of a posterior sample (rows = draws).
inline Vector rmse_by_param(const Matrix& sample, std::span<const double> truth) {
  if (static_cast<std::size_t>(sample.cols()) != truth.size()) {
    throw DimensionError("srmse: parameter dimension mismatch");
  }
  if (sample.rows() < 1) throw ArgumentError("srmse: empty sample");
  Vector out(sample.cols());
  for (Eigen::Index j = 0; j < sample.cols(); ++j) {
    const Eigen::VectorXd col = sample.col(j);
    out[j] = rmse(as_span(col), truth[static_cast<std::size_t>(j)]);
  }
  return out;
}

/// Sum over parameters of the per-parameter RMSE.
inline double srmse(const Matrix& sample, std::span<const double> truth) { return rmse_by_param(sample, truth).sum(); }

inline double srmse(const PosteriorSample& sample, std::span<const double> truth) {
  return srmse(sample.params, truth);
}

// ---------------------------------------------------------------------------
// Transformation parameters

enum class Method { identity, regression, pls };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::identity:
      return "identity";
    case Method::regression:
      return "regression";
    case Method::pls:
      return "pls";
  }
  return "?";
}

/// lambda: neighbourhood fraction plus method settings.
struct TransformationParams {
  double alpha = 1.0;
  Method method = Method::regression;
  std::size_t local_components = 0;    // pls: components of the local transformation
  std::size_t initial_components = 0;  // pls: components of the initial (localizing) transformation

  friend bool operator==(const TransformationParams&, const TransformationParams&) = default;
};

inline std::string describe(const TransformationParams& p) {
  std::string s = to_string(p.method) + "(alpha=" + std::to_string(p.alpha);
  if (p.method == Method::pls) {
    s += ", initial=" + std::to_string(p.initial_components) + ", local=" + std::to_string(p.local_components);
  }
  return s + ")";
}

/// round(alpha * N).
inline std::size_t neighborhood_size(double alpha, std::size_t n_sims) {
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(n_sims)));
}

/// Candidate set Lambda searched by local_projection_optimized. Non-empty, no duplicates.
class CandidateGrid {
 public:
  explicit CandidateGrid(std::vector<TransformationParams> points) : points_(std::move(points)) {
    if (points_.empty()) throw ArgumentError("candidate grid is empty");
    for (std::size_t a = 0; a < points_.size(); ++a) {
      const auto& p = points_[a];
      if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ArgumentError("candidate grid: alpha must lie in (0, 1]");
      if (p.method == Method::identity) throw ArgumentError("candidate grid: local method must be regression or pls");
      if (p.method == Method::pls && (p.local_components < 1 || p.initial_components < 1)) {
        throw ArgumentError("candidate grid: pls component counts must be positive");
      }
      for (std::size_t b = 0; b < a; ++b) {
        if (points_[b] == p) throw ArgumentError("candidate grid: duplicate point " + describe(p));
      }
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  const TransformationParams& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

 private:
  std::vector<TransformationParams> points_;
};

/// alpha_k = 10^(-1.5 + 0.15 k), k = 0..9.
inline std::vector<double> default_alpha_grid() {
  std::vector<double> alphas;
  for (int k = 0; k < 10; ++k) alphas.push_back(std::pow(10.0, -1.5 + 0.15 * k));
  return alphas;
}

inline std::vector<std::size_t> default_component_grid() { return {1, 2, 3, 5, 8, 11, 15}; }

inline CandidateGrid regression_grid(const std::vector<double>& alphas) {
  std::vector<TransformationParams> pts;
  for (double a : alphas) pts.push_back({a, Method::regression, 0, 0});
  return CandidateGrid(std::move(pts));
}

/// Cartesian product alpha x initial components x local components, alpha outermost.
inline CandidateGrid pls_grid(const std::vector<double>& alphas, const std::vector<std::size_t>& initial,
                              const std::vector<std::size_t>& local) {
  std::vector<TransformationParams> pts;
  for (double a : alphas)
    for (std::size_t i : initial)
      for (std::size_t l : local) pts.push_back({a, Method::pls, l, i});
  return CandidateGrid(std::move(pts));
}

// ---------------------------------------------------------------------------
// Localization

/// The round(alpha N) simulations nearest to `s_obs` under `f1`, nearest first.
inline IndexSet local_neighborhood(const LinearTransformation& f1, double alpha, std::span<const double> s_obs,
                                   const AnalysisTable& table) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("local projection: alpha must lie in (0, 1]");
  const std::size_t n_local = neighborhood_size(alpha, table.n_sims());
  if (n_local < kMinFitSize) {
    throw TooFewSamplesError("local projection: neighbourhood of " + std::to_string(n_local) +
                             " simulations is below the minimum fit size " + std::to_string(kMinFitSize));
  }
  const Matrix z = f1.apply_rows(table.summaries());
  const Vector target = f1.apply(s_obs);
  return select_k_nearest(squared_distances_to(z, as_span(target)), n_local);
}

/// Fits lambda.method on the rows of `neighborhood`.
inline LinearTransformation fit_local(const TransformationParams& lambda, const IndexSet& neighborhood,
                                      const AnalysisTable& table) {
  LinearTransformation t = [&] {
    switch (lambda.method) {
      case Method::regression:
        return fit_ols(table.summaries(), table.params(), neighborhood.indices());
      case Method::pls:
        return fit_pls(table.summaries(), table.params(), lambda.local_components, neighborhood.indices());
      case Method::identity:
        break;
    }
    return LinearTransformation::identity(table.summary_dim());
  }();
  t.set_preprocessor_id(table.preprocessor().fingerprint());
  return t;
}

/// Localized transformation: fit lambda.method on the alpha N simulations
/// nearest to `s_obs` under the initial transformation `f1`.
inline LinearTransformation local_projection(const LinearTransformation& f1, const TransformationParams& lambda,
                                             std::span<const double> s_obs, const AnalysisTable& table) {
  return fit_local(lambda, local_neighborhood(f1, lambda.alpha, s_obs, table), table);
}

// ---------------------------------------------------------------------------
// Optimized localization

struct OptimizationConfig {
  std::size_t n_valid = 20;
  std::size_t n_post = 200;
  std::size_t n_final = 100;
  std::size_t threads = 1;
  /// Keep every inner posterior's index set in the diagnostics.
  bool keep_samples = false;
};

/// Builds the initial transformation f1 for a grid point.
///
/// Grid points sharing (method, initial_components) must map to the same
/// transformation; it is requested once per such group.
using InitialTransformationFactory = std::function<LinearTransformation(const TransformationParams&)>;

struct GridPointResult {
  TransformationParams params;
  bool feasible = true;
  std::string reason;
  double srmse_total = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> srmse_by_validation;
  std::vector<IndexSet> samples;  // per validation dataset, when requested
};

struct OptimizationDiagnostics {
  IndexSet validation;
  std::vector<GridPointResult> surface;
  std::size_t chosen_index = 0;
};

struct OptimizedProjection {
  LinearTransformation transformation;
  TransformationParams chosen;
  OptimizationDiagnostics diagnostics;
};

namespace detail {

struct PlsNeed {
  std::size_t components = 0;
  std::size_t grid_index = 0;
};

struct SizeGroup {
  std::size_t size = 0;
  std::size_t regression_index = SIZE_MAX;  // regression grid point at this size, if any
  std::vector<PlsNeed> pls;                 // pls grid points at this size, ascending components
};

}  // namespace detail

/// Optimized local projection.
///
/// 1. I_valid: the n_valid simulations nearest to s_obs under fv.
/// 2. For every grid point lambda and every validation row i, fits the local
///    transformation around row i (initial transformation from `f1_factory`),
///    accepts the n_post simulations nearest to row i, excluding i itself,
///    and scores the sample by SRMSE against theta_i.
/// 3. Picks the lambda with the smallest summed SRMSE (first in grid order on
///    ties) and returns local_projection with that lambda targeting s_obs.
///
/// Grid points that cannot be fitted (neighbourhood below kMinFitSize, more
/// components than the neighbourhood supports) are reported infeasible and
/// skipped. Nested neighbourhoods around one validation row share a single
/// moment accumulation, and PLS component counts share one SIMPLS run.
inline OptimizedProjection local_projection_optimized(const LinearTransformation& fv,
                                                      const InitialTransformationFactory& f1_factory,
                                                      const CandidateGrid& grid, const OptimizationConfig& cfg,
                                                      std::span<const double> s_obs, const AnalysisTable& table) {
  const std::size_t n = table.n_sims();
  const std::size_t q = table.summary_dim();
  if (cfg.n_valid < 1 || cfg.n_post < 1) throw ArgumentError("optimization: n_valid and n_post must be positive");
  if (cfg.n_valid + cfg.n_post > n) throw ArgumentError("optimization: n_valid + n_post exceeds the table size");

  OptimizationDiagnostics diag;
  {
    const Matrix zv = fv.apply_rows(table.summaries());
    const Vector target = fv.apply(s_obs);
    diag.validation = select_k_nearest(squared_distances_to(zv, as_span(target)), cfg.n_valid);
  }
  const std::size_t n_valid = diag.validation.size();

  diag.surface.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& res = diag.surface[g];
    res.params = grid[g];
    res.srmse_by_validation.assign(n_valid, std::numeric_limits<double>::quiet_NaN());
    if (cfg.keep_samples) res.samples.resize(n_valid);
    const std::size_t size = neighborhood_size(grid[g].alpha, n);
    if (size < kMinFitSize) {
      res.feasible = false;
      res.reason = "neighbourhood of " + std::to_string(size) + " rows below minimum fit size";
    } else if (grid[g].method == Method::pls && grid[g].local_components > max_pls_components(size, q)) {
      res.feasible = false;
      res.reason = "more components than the neighbourhood supports";
    }
  }

  // Group grid points by initial transformation.
  std::map<std::pair<int, std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!diag.surface[g].feasible) continue;
    const auto key = std::make_pair(static_cast<int>(grid[g].method),
                                    grid[g].method == Method::pls ? grid[g].initial_components : std::size_t{0});
    groups[key].push_back(g);
  }

  const Matrix& x = table.summaries();
  const Matrix& theta = table.params();

  for (const auto& [key, members] : groups) {
    const LinearTransformation f1 = f1_factory(grid[members.front()]);
    const Matrix z1 = f1.apply_rows(x);

    std::map<std::size_t, detail::SizeGroup> by_size;
    for (std::size_t g : members) {
      const std::size_t size = neighborhood_size(grid[g].alpha, n);
      auto& sg = by_size[size];
      sg.size = size;
      if (grid[g].method == Method::regression) {
        sg.regression_index = g;
      } else {
        sg.pls.push_back({grid[g].local_components, g});
      }
    }
    std::vector<detail::SizeGroup> sizes;
    for (auto& [s, sg] : by_size) {
      std::sort(sg.pls.begin(), sg.pls.end(),
                [](const detail::PlsNeed& a, const detail::PlsNeed& b) { return a.components < b.components; });
      sizes.push_back(std::move(sg));
    }
    const std::size_t largest = sizes.back().size;

    parallel_for(n_valid, cfg.threads, [&](std::size_t v) {
      const std::size_t target = diag.validation[v];
      const std::size_t exclude[1] = {target};
      const auto order = select_k_nearest(squared_distances_to(z1, row_span(z1, static_cast<Eigen::Index>(target))),
                                          largest);
      Moments m = Moments::around_row(x, theta, target);
      std::size_t filled = 0;
      const auto score = [&](const std::vector<double>& dist, std::size_t g) {
        IndexSet accepted = select_k_nearest(dist, cfg.n_post, exclude);
        PosteriorSample post = gather_posterior(theta, std::move(accepted));
        diag.surface[g].srmse_by_validation[v] = srmse(post, table.param_row(target));
        if (cfg.keep_samples) diag.surface[g].samples[v] = std::move(post.indices);
      };

      for (const auto& sg : sizes) {
        m.add(x, theta, std::span(order.indices()).subspan(filled, sg.size - filled));
        filled = sg.size;
        if (sg.regression_index != SIZE_MAX) {
          const LinearTransformation t = fit_ols_moments(m, {});
          const Matrix p = t.apply_rows(x);
          score(squared_distances_to(p, row_span(p, static_cast<Eigen::Index>(target))), sg.regression_index);
        }
        if (!sg.pls.empty()) {
          const SimplsFit fit = simpls_moments(m, sg.pls.back().components);
          if (fit.components() == 0) continue;
          const Matrix p = LinearTransformation::pls(fit.x_mean, fit.weights, fit.y_mean, fit.y_loadings, {})
                               .apply_rows(x);
          std::vector<double> dist(n, 0.0);
          std::size_t used = 0;
          for (const auto& need : sg.pls) {
            if (need.components > fit.components()) break;  // left as NaN: breakdown
            for (; used < need.components; ++used) {
              const auto c = static_cast<Eigen::Index>(used);
              const double ref = p(static_cast<Eigen::Index>(target), c);
              for (std::size_t r = 0; r < n; ++r) {
                const double diff = p(static_cast<Eigen::Index>(r), c) - ref;
                dist[r] += diff * diff;
              }
            }
            score(dist, need.grid_index);
          }
        }
      }
    });
  }

  std::size_t best = SIZE_MAX;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& res = diag.surface[g];
    if (!res.feasible) continue;
    double total = 0.0;
    for (double s : res.srmse_by_validation) total += s;
    if (!std::isfinite(total)) {
      res.feasible = false;
      res.reason = "transformation could not be fitted for every validation dataset";
      continue;
    }
    res.srmse_total = total;
    if (best == SIZE_MAX || total < diag.surface[best].srmse_total) best = g;
  }
  if (best == SIZE_MAX) {
    throw ArgumentError("optimization: every candidate transformation parameter is infeasible");
  }
  diag.chosen_index = best;
  const TransformationParams chosen = grid[best];
  LinearTransformation f1 = f1_factory(chosen);
  LinearTransformation fl = local_projection(f1, chosen, s_obs, table);
  return OptimizedProjection{std::move(fl), chosen, std::move(diag)};
}

// ---------------------------------------------------------------------------
// Global transformations

struct MethodSpec {
  Method method = Method::regression;
  /// PLS only: fixed component count, or 0 to select by cross-validation.
  std::size_t components = 0;
  PlsSelection selection{};
  std::uint64_t cv_seed = 0;
};

/// Regression, PLS or identity fitted on every row of the table.
inline LinearTransformation make_global_transformation(const MethodSpec& spec, const AnalysisTable& table) {
  const auto rows = detail::all_rows(table.n_sims());
  LinearTransformation t = LinearTransformation::identity(table.summary_dim());
  switch (spec.method) {
    case Method::identity:
      break;
    case Method::regression:
      t = fit_ols(table.summaries(), table.params(), rows);
      break;
    case Method::pls: {
      const std::size_t c = spec.components != 0
                                ? spec.components
                                : select_pls_components(table.summaries(), table.params(), rows, spec.selection,
                                                        spec.cv_seed);
      t = fit_pls(table.summaries(), table.params(), c, rows);
      break;
    }
  }
  t.set_preprocessor_id(table.preprocessor().fingerprint());
  return t;
}

}  // namespace locabc
