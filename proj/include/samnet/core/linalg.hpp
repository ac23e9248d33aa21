#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "samnet/core/errors.hpp"

namespace samnet {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// A matrix with zero columns is allowed and stands for a bypassed memory
/// (K = 0); every other use has strictly positive dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data size " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }

  /// Builds from nested rows; all rows must have equal length.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw DimensionError("ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_length(b, a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y = A x
inline Vector matvec(const Matrix& a, std::span<const double> x) {
  require_length(x, a.cols(), "matvec");
  Vector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

/// y = A^T x
inline Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  require_length(x, a.rows(), "matvec_transposed");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

/// A += scale * u v^T
inline void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v,
                      double scale = 1.0) {
  require_length(u, a.rows(), "add_outer (rows)");
  require_length(v, a.cols(), "add_outer (cols)");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    const double ur = scale * u[r];
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += ur * v[c];
  }
}

/// dst += scale * src, elementwise.
inline void axpy(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  require_length(src, dst.size(), "axpy");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw NumericError(std::string(what) + ": non-finite value");
}

/// Numerically stable softmax (max subtraction).
inline Vector softmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

/// Log-softmax via log-sum-exp.
inline Vector log_softmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("log_softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

/// Backward through softmax: given p = softmax(z) and g = dL/dp, returns dL/dz.
inline Vector softmax_backward(std::span<const double> p, std::span<const double> g) {
  const double inner = dot(p, g);
  Vector dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (g[i] - inner);
  return dz;
}

/// Index of the maximum, lowest index on ties.
inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace samnet
