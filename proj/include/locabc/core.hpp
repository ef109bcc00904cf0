#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "locabc/error.hpp"

namespace locabc {

/// Dense vector of reals (one parameter or summary vector).
using Vector = Eigen::VectorXd;

/// Row-major dense matrix; one row per simulation.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const Matrix& m, Eigen::Index row) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Vector to_vector(std::span<const double> values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// ---------------------------------------------------------------------------
// Index sets

/// Ordered, duplicate-free row indices into a SimulationTable.
///
/// Sets produced by `select_k_nearest` are ordered by ascending distance with
/// ties broken by ascending index.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::vector<std::size_t> sorted = indices_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArgumentError("IndexSet: duplicate index");
    }
  }

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::size_t operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

  bool contains(std::size_t index) const {
    return std::find(indices_.begin(), indices_.end(), index) != indices_.end();
  }

  /// Same members in ascending index order.
  IndexSet sorted() const {
    std::vector<std::size_t> out = indices_;
    std::sort(out.begin(), out.end());
    IndexSet s;
    s.indices_ = std::move(out);
    return s;
  }

  /// First `k` members (a prefix of the ordering).
  IndexSet prefix(std::size_t k) const {
    IndexSet s;
    s.indices_.assign(indices_.begin(), indices_.begin() + static_cast<std::ptrdiff_t>(std::min(k, size())));
    return s;
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

// ---------------------------------------------------------------------------
// Simulation tables

/// Provenance carried alongside a table.
struct TableMeta {
  std::string model;
  std::vector<std::array<double, 2>> prior;  // per-component uniform range of the prior draw
  std::uint64_t seed = 0;
  std::vector<std::string> param_names;
  std::vector<std::string> summary_names;

  friend bool operator==(const TableMeta&, const TableMeta&) = default;
};

/// N parameter vectors paired with N raw summary vectors. Immutable.
class SimulationTable {
 public:
  SimulationTable(Matrix params, Matrix summaries, TableMeta meta = {})
      : params_(std::move(params)), summaries_(std::move(summaries)), meta_(std::move(meta)) {
    if (params_.rows() < 1) {
      throw FormatError("simulation table needs at least one row");
    }
    if (params_.rows() != summaries_.rows()) {
      throw DimensionError("simulation table: parameter and summary row counts differ");
    }
    if (params_.cols() < 1 || summaries_.cols() < 1) {
      throw DimensionError("simulation table: empty parameter or summary dimension");
    }
    if (!params_.allFinite()) {
      throw DomainError("simulation table: non-finite parameter value");
    }
    if (!meta_.param_names.empty() && meta_.param_names.size() != param_dim()) {
      throw DimensionError("simulation table: parameter name count does not match d");
    }
    if (!meta_.summary_names.empty() && meta_.summary_names.size() != summary_dim()) {
      throw DimensionError("simulation table: summary name count does not match q");
    }
  }

  std::size_t n_sims() const noexcept { return static_cast<std::size_t>(params_.rows()); }
  std::size_t param_dim() const noexcept { return static_cast<std::size_t>(params_.cols()); }
  std::size_t summary_dim() const noexcept { return static_cast<std::size_t>(summaries_.cols()); }

  const Matrix& params() const noexcept { return params_; }
  const Matrix& summaries() const noexcept { return summaries_; }
  const TableMeta& meta() const noexcept { return meta_; }

  std::span<const double> param_row(std::size_t i) const { return row_span(params_, static_cast<Eigen::Index>(i)); }
  std::span<const double> summary_row(std::size_t i) const {
    return row_span(summaries_, static_cast<Eigen::Index>(i));
  }

  /// The first `n` rows, same metadata.
  SimulationTable head(std::size_t n) const {
    if (n < 1 || n > n_sims()) {
      throw ArgumentError("head: row count out of range");
    }
    const auto rows = static_cast<Eigen::Index>(n);
    return SimulationTable(params_.topRows(rows), summaries_.topRows(rows), meta_);
  }

  friend bool operator==(const SimulationTable& a, const SimulationTable& b) {
    return a.meta_ == b.meta_ && a.params_.rows() == b.params_.rows() && a.params_.cols() == b.params_.cols() &&
           a.summaries_.cols() == b.summaries_.cols() && a.params_ == b.params_ && a.summaries_ == b.summaries_;
  }

 private:
  Matrix params_;
  Matrix summaries_;
  TableMeta meta_;
};

// ---------------------------------------------------------------------------
// Distances and nearest neighbours

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("distance: length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

/// Squared Euclidean distance from every row of `rows` to `target`.
///
/// Ranking by squared distance is equivalent to ranking by distance and
/// avoids the square root on the hot path.
inline std::vector<double> squared_distances_to(const Matrix& rows, std::span<const double> target) {
  if (static_cast<std::size_t>(rows.cols()) != target.size()) {
    throw DimensionError("distance: target length does not match row length");
  }
  const Eigen::Map<const Eigen::RowVectorXd> t(target.data(), static_cast<Eigen::Index>(target.size()));
  std::vector<double> out(static_cast<std::size_t>(rows.rows()));
  Eigen::Map<Eigen::VectorXd>(out.data(), rows.rows()) = (rows.rowwise() - t).rowwise().squaredNorm();
  return out;
}

/// Indices of the `k` smallest distances, ascending, ties broken by smaller index.
///
/// Rows listed in `exclude` are never selected.
inline IndexSet select_k_nearest(std::span<const double> distances, std::size_t k,
                                 std::span<const std::size_t> exclude = {}) {
  const std::size_t n = distances.size();
  std::vector<char> skip(n, 0);
  std::size_t n_excluded = 0;
  for (std::size_t e : exclude) {
    if (e < n && !skip[e]) {
      skip[e] = 1;
      ++n_excluded;
    }
  }
  if (k < 1 || k > n - n_excluded) {
    throw ArgumentError("select_k_nearest: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n - n_excluded) + "]");
  }
  std::vector<std::size_t> order;
  order.reserve(n - n_excluded);
  for (std::size_t i = 0; i < n; ++i) {
    if (!skip[i]) {
      if (!std::isfinite(distances[i])) {
        throw DomainError("select_k_nearest: non-finite distance at row " + std::to_string(i));
      }
      order.push_back(i);
    }
  }
  const auto closer = [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
  };
  const auto kth = order.begin() + static_cast<std::ptrdiff_t>(k);
  if (kth != order.end()) {
    std::nth_element(order.begin(), kth - 1, order.end(), closer);
  }
  std::sort(order.begin(), kth, closer);
  order.resize(k);
  return IndexSet(std::move(order));
}

// ---------------------------------------------------------------------------
// Parallel loops

/// Runs `body(i)` for i in [0, n) on up to `threads` workers.
///
/// Each index is visited exactly once and results must be written to
/// index-addressed storage, so outputs do not depend on the worker count.
/// The first exception thrown by any worker is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) {
          body(i);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace locabc
