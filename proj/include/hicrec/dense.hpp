#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hicrec/errors.hpp"

namespace hicrec {

/// Row-major dense matrix. Vectors are stored as 1×n or n×1 matrices.
template <class T>
class DenseMatrix {
 public:
  using value_type = T;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    DenseMatrix out(n, m);
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != m) throw ShapeError("from_rows: ragged initializer");
      std::size_t c = 0;
      for (T v : row) out(r, c++) = v;
      ++r;
    }
    return out;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool same_shape(const DenseMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using Matrix = DenseMatrix<double>;

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <class T>
void require_same_shape(const DenseMatrix<T>& a, const DenseMatrix<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

}  // namespace detail

// Products use a fixed i-k-j loop order so summation order, and therefore the
// result bits, never depend on anything but the inputs.

template <class T>
DenseMatrix<T> matmul(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + detail::shape_str(a.rows(), a.cols()) + " * " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  DenseMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T{}) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// aᵀ·b without materializing the transpose.
template <class T>
DenseMatrix<T> matmul_tn(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + detail::shape_str(a.rows(), a.cols()) + "ᵀ * " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  DenseMatrix<T> out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = arow[i];
      if (aki == T{}) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

/// a·bᵀ without materializing the transpose.
template <class T>
DenseMatrix<T> matmul_nt(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + detail::shape_str(a.rows(), a.cols()) + " * " +
                     detail::shape_str(b.rows(), b.cols()) + "ᵀ");
  }
  DenseMatrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      T acc{};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <class T>
DenseMatrix<T> add(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  detail::require_same_shape(a, b, "add");
  DenseMatrix<T> out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

template <class T>
DenseMatrix<T> hadamard(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  detail::require_same_shape(a, b, "hadamard");
  DenseMatrix<T> out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

/// In-place a += b.
template <class T>
void accumulate(DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  detail::require_same_shape(a, b, "accumulate");
  auto o = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
}

/// Adds a 1×cols bias row to every row of m.
template <class T>
void add_row_bias(DenseMatrix<T>& m, const DenseMatrix<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw ShapeError("add_row_bias: bias must be 1x" + std::to_string(m.cols()));
  }
  auto b = bias.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += b[c];
  }
}

/// Column sums as a 1×cols row, accumulated into out.
template <class T>
void accumulate_column_sums(DenseMatrix<T>& out, const DenseMatrix<T>& m) {
  if (out.rows() != 1 || out.cols() != m.cols()) {
    throw ShapeError("accumulate_column_sums: target must be 1x" + std::to_string(m.cols()));
  }
  auto o = out.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) o[c] += row[c];
  }
}

template <class T>
T relu(T x) {
  return x > T{} ? x : T{};
}

template <class T>
DenseMatrix<T> relu(const DenseMatrix<T>& m) {
  DenseMatrix<T> out = m;
  for (T& v : out.values()) v = relu(v);
  return out;
}

/// Backward of ReLU given its pre-activation; the derivative at exactly 0 is 0.
template <class T>
DenseMatrix<T> relu_grad(const DenseMatrix<T>& preact, const DenseMatrix<T>& upstream) {
  detail::require_same_shape(preact, upstream, "relu_grad");
  DenseMatrix<T> out = upstream;
  auto o = out.values();
  auto p = preact.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(p[i] > T{})) o[i] = T{};
  }
  return out;
}

template <class T>
T sigmoid(T x) {
  if (x >= T{}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

/// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
  return x > T{} ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T row_dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("row_dot: length mismatch");
  T acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
bool all_finite(const DenseMatrix<T>& m) {
  for (T v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Glorot-uniform initialization with fan_in = rows and fan_out = cols.
template <class T = double>
DenseMatrix<T> xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ShapeError("xavier_init: shape must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix<T> out(rows, cols);
  for (T& v : out.values()) v = static_cast<T>(dist(rng));
  return out;
}

}  // namespace hicrec
