#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "locabc/core.hpp"
#include "locabc/simulators.hpp"

namespace locabc {

// ---------------------------------------------------------------------------
// Time-series summaries

/// Sample autocovariance with divisor n: (1/n) sum_{t} (y_t - ybar)(y_{t+lag} - ybar).
inline double autocovariance(std::span<const double> series, std::size_t lag) {
  const std::size_t n = series.size();
  if (lag >= n) {
    throw DomainError("autocovariance: lag " + std::to_string(lag) + " needs a series longer than " +
                      std::to_string(n));
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) {
    acc += (series[t] - mean) * (series[t + lag] - mean);
  }
  return acc / static_cast<double>(n);
}

/// autocovariance(lag) / autocovariance(0); 0 for a constant series.
inline double autocorrelation(std::span<const double> series, std::size_t lag) {
  const double c0 = autocovariance(series, 0);
  const double c = autocovariance(series, lag);
  return c0 == 0.0 ? 0.0 : c / c0;
}

inline constexpr std::size_t kRickerObservations = 50;
inline constexpr std::size_t kRickerSummaryCount = 124;

/// Column names of ricker_summaries, in output order.
inline std::vector<std::string> ricker_summary_names() {
  std::vector<std::string> names;
  for (int lag = 1; lag <= 5; ++lag) names.push_back("acov_" + std::to_string(lag));
  for (int lag = 1; lag <= 5; ++lag) names.push_back("acor_" + std::to_string(lag));
  names.emplace_back("mean");
  names.emplace_back("var");
  for (int k = 0; k <= 4; ++k) names.push_back("count_eq_" + std::to_string(k));
  for (int i = 2; i <= 6; ++i) names.push_back("log1p_sum_pow_" + std::to_string(i));
  names.emplace_back("log1p_mean");
  names.emplace_back("log1p_var");
  for (std::size_t t = 1; t <= kRickerObservations; ++t) names.push_back("y_" + std::to_string(t));
  for (std::size_t t = 1; t <= kRickerObservations; ++t) names.push_back("y_sorted_" + std::to_string(t));
  return names;
}

/// The 124 candidate summaries of a 50-step Ricker dataset.
///
/// Order: autocovariances lags 1-5, autocorrelations lags 1-5, mean,
/// variance (divisor n), #{y_t = k} for k = 0..4, log(1 + sum y^i) for
/// i = 2..6, log(1 + mean), log(1 + variance), the 50 observations in time
/// order, then the 50 observations sorted ascending.
inline Vector ricker_summaries(std::span<const double> y) {
  if (y.size() != kRickerObservations) {
    throw DimensionError("ricker_summaries: expected 50 observations, got " + std::to_string(y.size()));
  }
  const double n = static_cast<double>(y.size());
  Vector s(static_cast<Eigen::Index>(kRickerSummaryCount));
  Eigen::Index c = 0;
  for (std::size_t lag = 1; lag <= 5; ++lag) s[c++] = autocovariance(y, lag);
  for (std::size_t lag = 1; lag <= 5; ++lag) s[c++] = autocorrelation(y, lag);

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  const double variance = autocovariance(y, 0);
  s[c++] = mean;
  s[c++] = variance;

  for (int k = 0; k <= 4; ++k) {
    s[c++] = static_cast<double>(std::count(y.begin(), y.end(), static_cast<double>(k)));
  }
  for (int i = 2; i <= 6; ++i) {
    double acc = 0.0;
    for (double v : y) acc += std::pow(v, i);
    s[c++] = std::log1p(acc);
  }
  s[c++] = std::log1p(mean);
  s[c++] = std::log1p(variance);

  for (double v : y) s[c++] = v;
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted) s[c++] = v;
  return s;
}

/// 1-based order-statistic ranks used by gk_summaries:
/// r_j = clamp(round((j - 0.5) n / m), 1, n), j = 1..m, with halves rounded up.
inline std::vector<std::size_t> quantile_ranks(std::size_t n, std::size_t n_quantiles) {
  if (n_quantiles < 1 || n < n_quantiles) {
    throw ArgumentError("quantile ranks: need n >= n_quantiles >= 1");
  }
  std::vector<std::size_t> ranks(n_quantiles);
  for (std::size_t j = 1; j <= n_quantiles; ++j) {
    // round((2j - 1) n / (2m)) in exact integer arithmetic.
    const std::size_t r = ((2 * j - 1) * n + n_quantiles) / (2 * n_quantiles);
    ranks[j - 1] = std::clamp<std::size_t>(r, 1, n);
  }
  return ranks;
}

inline std::vector<std::string> gk_summary_names(std::size_t n_quantiles) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= n_quantiles; ++j) names.push_back("q_" + std::to_string(j));
  return names;
}

/// Evenly spaced sample quantiles (order statistics at quantile_ranks).
inline Vector gk_summaries(std::span<const double> data, std::size_t n_quantiles) {
  const auto ranks = quantile_ranks(data.size(), n_quantiles);
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  Vector s(static_cast<Eigen::Index>(n_quantiles));
  for (std::size_t j = 0; j < n_quantiles; ++j) {
    s[static_cast<Eigen::Index>(j)] = sorted[ranks[j] - 1];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessedSummary {
  Vector values;
  /// Set when a square-rooted column received a negative value; the value
  /// was standardized without the root.
  bool warning = false;
};

/// Square root on non-negative columns, then standardization; zero-variance columns are dropped.
class Preprocessor {
 public:
  /// Fits on every row of `raw` (N x q). Needs N >= 2.
  static Preprocessor fit(const Matrix& raw) {
    const auto n = raw.rows();
    const auto q = raw.cols();
    if (n < 2) {
      throw ArgumentError("fit_preprocessor: need at least two simulations");
    }
    if (!raw.allFinite()) {
      throw DomainError("fit_preprocessor: table contains non-finite summaries");
    }
    Preprocessor p;
    p.sqrt_mask_.assign(static_cast<std::size_t>(q), false);
    p.means_ = Vector::Zero(q);
    p.sds_ = Vector::Zero(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const bool nonneg = (raw.col(j).array() >= 0.0).all();
      p.sqrt_mask_[static_cast<std::size_t>(j)] = nonneg;
      Eigen::VectorXd col = raw.col(j);
      if (nonneg) col = col.array().sqrt();
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
      const double sd = std::sqrt(var);
      p.means_[j] = mean;
      if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) {
        p.dropped_.push_back(static_cast<std::size_t>(j));
      } else {
        p.sds_[j] = sd;
        p.retained_.push_back(static_cast<std::size_t>(j));
      }
    }
    if (p.retained_.empty()) {
      throw UnusableTableError("fit_preprocessor: every summary column has zero variance");
    }
    return p;
  }

  static Preprocessor fit(const SimulationTable& table) { return fit(table.summaries()); }

  std::size_t raw_dim() const noexcept { return sqrt_mask_.size(); }
  std::size_t retained_dim() const noexcept { return retained_.size(); }
  const std::vector<bool>& sqrt_mask() const noexcept { return sqrt_mask_; }
  const Vector& means() const noexcept { return means_; }
  /// Standard deviations after the root; 0 for dropped columns.
  const Vector& sds() const noexcept { return sds_; }
  const std::vector<std::size_t>& dropped() const noexcept { return dropped_; }
  const std::vector<std::size_t>& retained() const noexcept { return retained_; }

  PreprocessedSummary apply(std::span<const double> raw) const {
    if (raw.size() != raw_dim()) {
      throw DimensionError("apply_preprocessor: expected " + std::to_string(raw_dim()) + " summaries, got " +
                           std::to_string(raw.size()));
    }
    PreprocessedSummary out;
    out.values.resize(static_cast<Eigen::Index>(retained_.size()));
    for (std::size_t r = 0; r < retained_.size(); ++r) {
      const std::size_t j = retained_[r];
      double v = raw[j];
      if (!std::isfinite(v)) {
        throw DomainError("apply_preprocessor: non-finite summary in column " + std::to_string(j + 1));
      }
      if (sqrt_mask_[j]) {
        if (v >= 0.0) {
          v = std::sqrt(v);
        } else {
          out.warning = true;
        }
      }
      const auto jj = static_cast<Eigen::Index>(j);
      out.values[static_cast<Eigen::Index>(r)] = (v - means_[jj]) / sds_[jj];
    }
    return out;
  }

  /// Applies to every row of `raw`; rows of the fitting table never warn.
  Matrix apply_all(const Matrix& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != raw_dim()) {
      throw DimensionError("apply_preprocessor: column count mismatch");
    }
    Matrix out(raw.rows(), static_cast<Eigen::Index>(retained_.size()));
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      out.row(i) = apply(row_span(raw, i)).values.transpose();
    }
    return out;
  }

  /// Stable identity string for audit bundles.
  std::string fingerprint() const {
    std::uint64_t h = splitmix64(raw_dim());
    for (std::size_t j = 0; j < raw_dim(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      h = splitmix64(h ^ (sqrt_mask_[j] ? 1ULL : 0ULL));
      h = splitmix64(h ^ std::bit_cast<std::uint64_t>(means_[jj]));
      h = splitmix64(h ^ std::bit_cast<std::uint64_t>(sds_[jj]));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::vector<bool> sqrt_mask_;
  Vector means_;
  Vector sds_;
  std::vector<std::size_t> dropped_;
  std::vector<std::size_t> retained_;
};

inline Preprocessor fit_preprocessor(const SimulationTable& table) { return Preprocessor::fit(table); }

inline PreprocessedSummary apply_preprocessor(const Preprocessor& prep, std::span<const double> raw) {
  return prep.apply(raw);
}

}  // namespace locabc
