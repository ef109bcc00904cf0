#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locabc/core.hpp"
#include "locabc/moments.hpp"
#include "locabc/rng.hpp"

namespace locabc {

/// Fits on fewer rows than this are refused by the localization layer.
inline constexpr std::size_t kMinFitSize = 10;

enum class TransformKind { identity, regression, pls };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::regression:
      return "regression";
    case TransformKind::pls:
      return "pls";
  }
  return "?";
}

/// A fitted linear map from preprocessed summaries (length q) to projected summaries (length p).
///
///  - identity:   s
///  - regression: intercept + s * weights          (p = d, weights q x d)
///  - pls:        (s - center) * weights           (p = components, weights q x p)
///
/// PLS transformations keep their response loadings so they can also predict
/// parameters, which component selection and the audit bundle need.
class LinearTransformation {
 public:
  static LinearTransformation identity(std::size_t dim) {
    if (dim < 1) throw ArgumentError("identity transformation needs a positive dimension");
    LinearTransformation t;
    t.kind_ = TransformKind::identity;
    t.input_dim_ = dim;
    return t;
  }

  static LinearTransformation regression(Vector intercept, Eigen::MatrixXd weights, std::vector<std::size_t> fit_indices) {
    if (weights.rows() < 1 || weights.cols() < 1 || intercept.size() != weights.cols()) {
      throw DimensionError("regression transformation: intercept and weights disagree");
    }
    if (!weights.allFinite() || !intercept.allFinite()) {
      throw DomainError("regression transformation: non-finite coefficients");
    }
    LinearTransformation t;
    t.kind_ = TransformKind::regression;
    t.input_dim_ = static_cast<std::size_t>(weights.rows());
    t.intercept_ = std::move(intercept);
    t.weights_ = std::move(weights);
    t.fit_indices_ = std::move(fit_indices);
    return t;
  }

  static LinearTransformation pls(Vector center, Eigen::MatrixXd weights, Vector y_mean, Eigen::MatrixXd y_loadings,
                                  std::vector<std::size_t> fit_indices) {
    if (weights.cols() < 1) {
      throw ArgumentError("pls transformation needs at least one component");
    }
    if (center.size() != weights.rows() || y_loadings.cols() != weights.cols() || y_loadings.rows() != y_mean.size()) {
      throw DimensionError("pls transformation: inconsistent dimensions");
    }
    if (!weights.allFinite() || !center.allFinite() || !y_loadings.allFinite()) {
      throw DomainError("pls transformation: non-finite coefficients");
    }
    LinearTransformation t;
    t.kind_ = TransformKind::pls;
    t.input_dim_ = static_cast<std::size_t>(weights.rows());
    t.center_ = std::move(center);
    t.weights_ = std::move(weights);
    t.y_mean_ = std::move(y_mean);
    t.y_loadings_ = std::move(y_loadings);
    t.fit_indices_ = std::move(fit_indices);
    return t;
  }

  TransformKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept {
    return kind_ == TransformKind::identity ? input_dim_ : static_cast<std::size_t>(weights_.cols());
  }
  std::size_t n_components() const noexcept { return kind_ == TransformKind::pls ? output_dim() : 0; }

  const Vector& intercept() const noexcept { return intercept_; }
  const Vector& center() const noexcept { return center_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const Vector& y_mean() const noexcept { return y_mean_; }
  const Eigen::MatrixXd& y_loadings() const noexcept { return y_loadings_; }
  /// Rows the transformation was fitted on, ascending. Empty for identity.
  const std::vector<std::size_t>& fit_indices() const noexcept { return fit_indices_; }

  const std::string& preprocessor_id() const noexcept { return preprocessor_id_; }
  void set_preprocessor_id(std::string id) { preprocessor_id_ = std::move(id); }

  Vector apply(std::span<const double> s) const {
    if (s.size() != input_dim_) {
      throw DimensionError("apply_transformation: expected " + std::to_string(input_dim_) + " summaries, got " +
                           std::to_string(s.size()));
    }
    const Eigen::Map<const Vector> x(s.data(), static_cast<Eigen::Index>(s.size()));
    switch (kind_) {
      case TransformKind::identity:
        return x;
      case TransformKind::regression:
        return intercept_ + weights_.transpose() * x;
      case TransformKind::pls:
        return weights_.transpose() * (x - center_);
    }
    return x;
  }

  /// Transforms every row of `rows` (N x q) into an N x p matrix.
  Matrix apply_rows(const Matrix& rows) const {
    if (static_cast<std::size_t>(rows.cols()) != input_dim_) {
      throw DimensionError("apply_transformation: column count mismatch");
    }
    switch (kind_) {
      case TransformKind::identity:
        return rows;
      case TransformKind::regression: {
        Matrix out = rows * weights_;
        out.rowwise() += intercept_.transpose();
        return out;
      }
      case TransformKind::pls: {
        Matrix out = rows * weights_;
        out.rowwise() -= (center_.transpose() * weights_);
        return out;
      }
    }
    return rows;
  }

  /// The first `c` PLS components.
  LinearTransformation truncated(std::size_t c) const {
    if (kind_ != TransformKind::pls) throw ArgumentError("truncated: only PLS transformations have components");
    if (c < 1 || c > n_components()) throw ArgumentError("truncated: component count out of range");
    const auto k = static_cast<Eigen::Index>(c);
    LinearTransformation t = pls(center_, weights_.leftCols(k), y_mean_, y_loadings_.leftCols(k), fit_indices_);
    t.preprocessor_id_ = preprocessor_id_;
    return t;
  }

  /// Parameter predictions implied by the transformation (regression: itself; PLS: ybar + scores * Q').
  Matrix predict_rows(const Matrix& rows) const {
    switch (kind_) {
      case TransformKind::regression:
        return apply_rows(rows);
      case TransformKind::pls: {
        Matrix out = apply_rows(rows) * y_loadings_.transpose();
        out.rowwise() += y_mean_.transpose();
        return out;
      }
      case TransformKind::identity:
        break;
    }
    throw ArgumentError("predict: identity transformation has no parameter predictions");
  }

 private:
  TransformKind kind_ = TransformKind::identity;
  std::size_t input_dim_ = 0;
  Vector intercept_;
  Vector center_;
  Eigen::MatrixXd weights_;
  Vector y_mean_;
  Eigen::MatrixXd y_loadings_;
  std::vector<std::size_t> fit_indices_;
  std::string preprocessor_id_;
};

inline Vector apply_transformation(const LinearTransformation& t, std::span<const double> s) { return t.apply(s); }

// ---------------------------------------------------------------------------
// Least squares

namespace detail {

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

inline void check_design(const Matrix& S, const Matrix& theta) {
  if (S.rows() != theta.rows()) throw DimensionError("fit: summary and parameter row counts differ");
  if (S.cols() < 1 || theta.cols() < 1) throw DimensionError("fit: empty design");
}

inline std::vector<std::size_t> sorted_rows(std::span<const std::size_t> rows, std::size_t n) {
  std::vector<std::size_t> out(rows.begin(), rows.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ArgumentError("fit: duplicate row index");
  if (!out.empty() && out.back() >= n) throw ArgumentError("fit: row index out of range");
  return out;
}

}  // namespace detail

/// Relative eigenvalue cutoff of the scatter matrix below which a direction is treated as null.
inline constexpr double kRankTolerance = 1e-12;

/// Minimum-norm least squares with intercept from accumulated moments.
///
/// Solves (X'X) beta = X'Y on centered data through an eigendecomposition
/// with directions below kRankTolerance * lambda_max discarded; the
/// intercept is ybar - xbar * beta.
inline LinearTransformation fit_ols_moments(const Moments& m, std::vector<std::size_t> fit_indices) {
  if (m.count() < 2) throw ArgumentError("fit_ols: need at least two rows");
  const Eigen::MatrixXd g = m.scatter_xx();
  const Eigen::MatrixXd c = m.scatter_xy();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) throw DomainError("fit_ols: eigendecomposition failed");
  const Vector& lambda = es.eigenvalues();
  const double cutoff = kRankTolerance * std::max(lambda.maxCoeff(), 0.0);
  Vector inv = Vector::Zero(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda[k] > cutoff && lambda[k] > 0.0) inv[k] = 1.0 / lambda[k];
  }
  const Eigen::MatrixXd& v = es.eigenvectors();
  Eigen::MatrixXd beta = v * inv.asDiagonal() * (v.transpose() * c);
  Vector intercept = m.mean_y() - beta.transpose() * m.mean_x();
  return LinearTransformation::regression(std::move(intercept), std::move(beta), std::move(fit_indices));
}

/// Least squares fit of theta on S (with intercept) over `rows`.
inline LinearTransformation fit_ols(const Matrix& S, const Matrix& theta, std::span<const std::size_t> rows) {
  detail::check_design(S, theta);
  auto sorted = detail::sorted_rows(rows, static_cast<std::size_t>(S.rows()));
  if (sorted.size() < 2) throw ArgumentError("fit_ols: need at least two rows");
  Moments m = Moments::around_row(S, theta, sorted.front());
  m.add(S, theta, sorted);
  return fit_ols_moments(m, std::move(sorted));
}

inline LinearTransformation fit_ols(const Matrix& S, const Matrix& theta) {
  const auto rows = detail::all_rows(static_cast<std::size_t>(S.rows()));
  return fit_ols(S, theta, rows);
}

// ---------------------------------------------------------------------------
// Partial least squares (SIMPLS)

/// Raw SIMPLS output on centered moments.
///
/// Weight columns are scaled so the training scores X_c w have unit norm;
/// y-loadings are Y_c' t.
struct SimplsFit {
  Eigen::MatrixXd weights;     // q x c
  Eigen::MatrixXd y_loadings;  // d x c
  Vector x_mean;
  Vector y_mean;
  std::size_t components() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Runs up to `max_components` SIMPLS iterations (de Jong, 1993) on the
/// scatter matrices held by `m`. Stops early when the cross-covariance is
/// exhausted, so the result may have fewer components than requested; the
/// first c components never depend on how many more are requested.
inline SimplsFit simpls_moments(const Moments& m, std::size_t max_components) {
  const Eigen::MatrixXd g = m.scatter_xx();
  const Eigen::MatrixXd c0 = m.scatter_xy();
  const Eigen::Index q = g.rows();
  const auto cmax = static_cast<Eigen::Index>(std::min<std::size_t>(max_components, static_cast<std::size_t>(q)));

  Eigen::MatrixXd cov = c0;
  Eigen::MatrixXd basis(q, cmax);
  Eigen::MatrixXd weights(q, cmax);
  Eigen::MatrixXd yload(c0.cols(), cmax);
  const double g_scale = std::max(g.trace(), 0.0);
  double first_sv = -1.0;
  Eigen::Index a = 0;
  for (; a < cmax; ++a) {
    Vector r;
    double sv = 0.0;
    if (cov.cols() == 1) {
      sv = cov.col(0).norm();
      r = sv > 0.0 ? Vector(cov.col(0) / sv) : Vector(Vector::Zero(q));
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeThinU);
      sv = svd.singularValues()[0];
      r = svd.matrixU().col(0);
    }
    if (first_sv < 0.0) first_sv = sv;
    if (!(sv > 0.0) || sv <= 1e-10 * first_sv) break;
    Eigen::Index big = 0;
    r.cwiseAbs().maxCoeff(&big);
    if (r[big] < 0.0) r = -r;

    const double tt = r.dot(g * r);
    if (!(tt > 1e-14 * g_scale)) break;
    const Vector w = r / std::sqrt(tt);
    Vector v = g * w;  // x-loading X_c' t
    for (int pass = 0; pass < 2; ++pass) {
      if (a > 0) v -= basis.leftCols(a) * (basis.leftCols(a).transpose() * v);
    }
    const double vn = v.norm();
    if (!(vn > 0.0)) break;
    v /= vn;
    basis.col(a) = v;
    weights.col(a) = w;
    yload.col(a) = c0.transpose() * w;
    cov -= v * (v.transpose() * cov);
    cov -= basis.leftCols(a + 1) * (basis.leftCols(a + 1).transpose() * cov);
  }
  SimplsFit fit;
  fit.weights = weights.leftCols(a);
  fit.y_loadings = yload.leftCols(a);
  fit.x_mean = m.mean_x();
  fit.y_mean = m.mean_y();
  return fit;
}

inline LinearTransformation pls_transformation(const SimplsFit& fit, std::size_t components,
                                               std::vector<std::size_t> fit_indices) {
  if (components < 1 || components > fit.components()) {
    throw ArgumentError("pls: " + std::to_string(components) + " components requested, " +
                        std::to_string(fit.components()) + " available");
  }
  const auto c = static_cast<Eigen::Index>(components);
  return LinearTransformation::pls(fit.x_mean, fit.weights.leftCols(c), fit.y_mean, fit.y_loadings.leftCols(c),
                                   std::move(fit_indices));
}

/// Largest component count `fit_pls` accepts for n rows and q summaries.
inline std::size_t max_pls_components(std::size_t n, std::size_t q) { return std::min(n > 0 ? n - 1 : 0, q); }

/// PLS score map with `n_components` components fitted on `rows`.
inline LinearTransformation fit_pls(const Matrix& S, const Matrix& theta, std::size_t n_components,
                                    std::span<const std::size_t> rows) {
  detail::check_design(S, theta);
  auto sorted = detail::sorted_rows(rows, static_cast<std::size_t>(S.rows()));
  if (n_components < 1 || n_components > max_pls_components(sorted.size(), static_cast<std::size_t>(S.cols()))) {
    throw ArgumentError("fit_pls: n_components=" + std::to_string(n_components) + " outside [1, min(n-1, q)]");
  }
  Moments m = Moments::around_row(S, theta, sorted.front());
  m.add(S, theta, sorted);
  const SimplsFit fit = simpls_moments(m, n_components);
  if (fit.components() < n_components) {
    throw DomainError("fit_pls: design supports only " + std::to_string(fit.components()) + " components");
  }
  return pls_transformation(fit, n_components, std::move(sorted));
}

inline LinearTransformation fit_pls(const Matrix& S, const Matrix& theta, std::size_t n_components) {
  const auto rows = detail::all_rows(static_cast<std::size_t>(S.rows()));
  return fit_pls(S, theta, n_components, rows);
}

// ---------------------------------------------------------------------------
// Cross-validated component selection

struct PlsSelection {
  std::size_t max_components = 15;
  std::size_t folds = 10;
  double threshold_frac = 0.01;
};

/// Cross-validated mean squared error (summed over parameters) for 0..cmax components.
struct CvCurve {
  std::vector<double> mse;  // mse[c] for c components
  double total_variation = 0.0;
};

/// K-fold CV of PLS predictions over `rows`. Folds are contiguous blocks of a
/// seeded Fisher-Yates shuffle of the rows.
inline CvCurve pls_cv_curve(const Matrix& S, const Matrix& theta, std::span<const std::size_t> rows,
                            std::size_t max_components, std::size_t folds, std::uint64_t seed) {
  detail::check_design(S, theta);
  const std::size_t n = rows.size();
  if (folds < 2 || n < folds) throw ArgumentError("pls cv: need n >= folds >= 2");

  std::vector<std::size_t> order(rows.begin(), rows.end());
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[uniform_index(rng, i + 1)]);
  }

  std::vector<std::size_t> bounds(folds + 1, 0);
  for (std::size_t f = 0; f < folds; ++f) {
    bounds[f + 1] = bounds[f] + n / folds + (f < n % folds ? 1 : 0);
  }

  const std::size_t shift_row = order.front();
  std::vector<Moments> fold_moments;
  fold_moments.reserve(folds);
  Moments total = Moments::around_row(S, theta, shift_row);
  for (std::size_t f = 0; f < folds; ++f) {
    Moments mf = Moments::around_row(S, theta, shift_row);
    mf.add(S, theta, std::span(order).subspan(bounds[f], bounds[f + 1] - bounds[f]));
    total += mf;
    fold_moments.push_back(std::move(mf));
  }

  const std::size_t smallest_train = n - (bounds[1] - bounds[0]);
  const std::size_t cmax =
      std::min(max_components, max_pls_components(smallest_train, static_cast<std::size_t>(S.cols())));

  CvCurve curve;
  curve.mse.assign(cmax + 1, 0.0);
  curve.total_variation = total.scatter_yy().sum() / static_cast<double>(n - 1);

  for (std::size_t f = 0; f < folds; ++f) {
    Moments train = total;
    train -= fold_moments[f];
    const SimplsFit fit = simpls_moments(train, cmax);
    const std::size_t len = bounds[f + 1] - bounds[f];
    Matrix xf(static_cast<Eigen::Index>(len), S.cols());
    Matrix yf(static_cast<Eigen::Index>(len), theta.cols());
    for (std::size_t k = 0; k < len; ++k) {
      const auto r = static_cast<Eigen::Index>(order[bounds[f] + k]);
      xf.row(static_cast<Eigen::Index>(k)) = S.row(r) - fit.x_mean.transpose();
      yf.row(static_cast<Eigen::Index>(k)) = theta.row(r) - fit.y_mean.transpose();
    }
    const Matrix scores = xf * fit.weights;
    Matrix resid = yf;
    curve.mse[0] += resid.squaredNorm();
    for (std::size_t c = 1; c <= cmax; ++c) {
      if (c <= fit.components()) {
        const auto k = static_cast<Eigen::Index>(c - 1);
        resid.noalias() -= scores.col(k) * fit.y_loadings.col(k).transpose();
      }
      curve.mse[c] += resid.squaredNorm();
    }
  }
  for (double& v : curve.mse) v /= static_cast<double>(n);
  return curve;
}

/// Smallest c >= 1 such that component c+1 lowers CV-MSE by less than
/// threshold_frac times the total variation of theta, capped at max_components.
inline std::size_t select_pls_components(const CvCurve& curve, double threshold_frac) {
  const std::size_t cmax = curve.mse.size() - 1;
  if (cmax < 1 || !(curve.total_variation > 0.0)) return 1;
  const double threshold = threshold_frac * curve.total_variation;
  for (std::size_t c = 1; c < cmax; ++c) {
    if (curve.mse[c] - curve.mse[c + 1] < threshold) return c;
  }
  return cmax;
}

inline std::size_t select_pls_components(const Matrix& S, const Matrix& theta, std::span<const std::size_t> rows,
                                         const PlsSelection& sel, std::uint64_t seed) {
  if (sel.max_components < 1) throw ArgumentError("select_pls_components: max_components must be positive");
  if (!(sel.threshold_frac >= 0.0)) throw ArgumentError("select_pls_components: negative threshold");
  const CvCurve curve = pls_cv_curve(S, theta, rows, sel.max_components, sel.folds, seed);
  return select_pls_components(curve, sel.threshold_frac);
}

inline std::size_t select_pls_components(const Matrix& S, const Matrix& theta, const PlsSelection& sel,
                                         std::uint64_t seed) {
  const auto rows = detail::all_rows(static_cast<std::size_t>(S.rows()));
  return select_pls_components(S, theta, rows, sel, seed);
}

}  // namespace locabc
