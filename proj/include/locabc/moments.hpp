#pragma once

#include <span>
#include <vector>

#include "locabc/core.hpp"

namespace locabc {

/// First and second moments of (summaries, parameters) over a set of rows.
///
/// Both least squares and SIMPLS only need the centered cross-products
/// X'X, X'Y and the column means, so a neighbourhood fit costs one pass over
/// its rows and nested neighbourhoods can share a single running
/// accumulation. Sums are taken around a fixed shift (normally a member row)
/// to limit cancellation when the rows sit far from the origin.
class Moments {
 public:
  Moments(Vector x_shift, Vector y_shift)
      : x_shift_(std::move(x_shift)),
        y_shift_(std::move(y_shift)),
        sx_(Vector::Zero(x_shift_.size())),
        sy_(Vector::Zero(y_shift_.size())),
        sxx_(Eigen::MatrixXd::Zero(x_shift_.size(), x_shift_.size())),
        sxy_(Eigen::MatrixXd::Zero(x_shift_.size(), y_shift_.size())),
        syy_(Vector::Zero(y_shift_.size())) {}

  /// Shift taken from row `row` of (X, Y).
  static Moments around_row(const Matrix& X, const Matrix& Y, std::size_t row) {
    const auto r = static_cast<Eigen::Index>(row);
    return Moments(X.row(r).transpose(), Y.row(r).transpose());
  }

  /// Accumulates the listed rows in order.
  void add(const Matrix& X, const Matrix& Y, std::span<const std::size_t> rows) {
    if (X.cols() != x_dim() || Y.cols() != y_dim()) {
      throw DimensionError("moments: column count mismatch");
    }
    constexpr std::size_t kBlock = 256;
    Matrix xb;
    Matrix yb;
    for (std::size_t start = 0; start < rows.size(); start += kBlock) {
      const std::size_t len = std::min(kBlock, rows.size() - start);
      const auto b = static_cast<Eigen::Index>(len);
      xb.resize(b, x_dim());
      yb.resize(b, y_dim());
      for (Eigen::Index k = 0; k < b; ++k) {
        const auto r = static_cast<Eigen::Index>(rows[start + static_cast<std::size_t>(k)]);
        xb.row(k) = X.row(r) - x_shift_.transpose();
        yb.row(k) = Y.row(r) - y_shift_.transpose();
      }
      sx_ += xb.colwise().sum().transpose();
      sy_ += yb.colwise().sum().transpose();
      sxx_.selfadjointView<Eigen::Lower>().rankUpdate(xb.transpose());
      sxy_.noalias() += xb.transpose() * yb;
      syy_ += yb.colwise().squaredNorm().transpose();
      n_ += len;
    }
  }

  /// Removes another accumulation taken around the same shift.
  Moments& operator-=(const Moments& other) {
    if (other.x_shift_ != x_shift_ || other.y_shift_ != y_shift_) {
      throw ArgumentError("moments: subtracting accumulations with different shifts");
    }
    if (other.n_ > n_) {
      throw ArgumentError("moments: subtracting a larger accumulation");
    }
    n_ -= other.n_;
    sx_ -= other.sx_;
    sy_ -= other.sy_;
    sxx_.triangularView<Eigen::Lower>() -= other.sxx_;
    sxy_ -= other.sxy_;
    syy_ -= other.syy_;
    return *this;
  }

  Moments& operator+=(const Moments& other) {
    if (other.x_shift_ != x_shift_ || other.y_shift_ != y_shift_) {
      throw ArgumentError("moments: adding accumulations with different shifts");
    }
    n_ += other.n_;
    sx_ += other.sx_;
    sy_ += other.sy_;
    sxx_.triangularView<Eigen::Lower>() += other.sxx_;
    sxy_ += other.sxy_;
    syy_ += other.syy_;
    return *this;
  }

  std::size_t count() const noexcept { return n_; }
  Eigen::Index x_dim() const noexcept { return x_shift_.size(); }
  Eigen::Index y_dim() const noexcept { return y_shift_.size(); }

  Vector mean_x() const { return x_shift_ + sx_ / static_cast<double>(n_); }
  Vector mean_y() const { return y_shift_ + sy_ / static_cast<double>(n_); }

  /// Centered scatter matrix sum (x - xbar)(x - xbar)'.
  Eigen::MatrixXd scatter_xx() const {
    Eigen::MatrixXd g = sxx_.selfadjointView<Eigen::Lower>();
    g.noalias() -= (sx_ * sx_.transpose()) / static_cast<double>(n_);
    return g;
  }

  /// Centered cross-product sum (x - xbar)(y - ybar)'.
  Eigen::MatrixXd scatter_xy() const {
    Eigen::MatrixXd c = sxy_;
    c.noalias() -= (sx_ * sy_.transpose()) / static_cast<double>(n_);
    return c;
  }

  /// Per-column centered sum of squares of y.
  Vector scatter_yy() const { return syy_ - sy_.cwiseProduct(sy_) / static_cast<double>(n_); }

 private:
  Vector x_shift_;
  Vector y_shift_;
  std::size_t n_ = 0;
  Vector sx_;
  Vector sy_;
  Eigen::MatrixXd sxx_;  // lower triangle only
  Eigen::MatrixXd sxy_;
  Vector syy_;
};

}  // namespace locabc
