#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hicrec/dense.hpp"
#include "hicrec/errors.hpp"

namespace hicrec {

template <class T>
struct Triplet {
  std::size_t row;
  std::size_t col;
  T value;
};

/// Compressed-sparse-row matrix with sorted, unique column indices per row.
template <class T>
class CsrMatrix {
 public:
  using value_type = T;

  CsrMatrix() : row_ptr_(1, 0) {}
  CsrMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from unordered triplets; duplicates are summed and zero sums dropped.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet<T>> entries) {
    for (const auto& t : entries) {
      if (t.row >= rows || t.col >= cols) {
        throw ShapeError("from_triplets: entry (" + std::to_string(t.row) + "," +
                         std::to_string(t.col) + ") outside " + detail::shape_str(rows, cols));
      }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix out(rows, cols);
    out.col_idx_.reserve(entries.size());
    out.values_.reserve(entries.size());
    std::size_t i = 0;
    while (i < entries.size()) {
      const std::size_t r = entries[i].row;
      const std::size_t c = entries[i].col;
      T sum{};
      for (; i < entries.size() && entries[i].row == r && entries[i].col == c; ++i) sum += entries[i].value;
      if (sum != T{}) {
        out.col_idx_.push_back(c);
        out.values_.push_back(sum);
        ++out.row_ptr_[r + 1];
      }
    }
    std::partial_sum(out.row_ptr_.begin(), out.row_ptr_.end(), out.row_ptr_.begin());
    return out;
  }

  static CsrMatrix from_dense(const DenseMatrix<T>& d) {
    CsrMatrix out(d.rows(), d.cols());
    for (std::size_t r = 0; r < d.rows(); ++r) {
      for (std::size_t c = 0; c < d.cols(); ++c) {
        if (d(r, c) != T{}) {
          out.col_idx_.push_back(c);
          out.values_.push_back(d(r, c));
        }
      }
      out.row_ptr_[r + 1] = out.col_idx_.size();
    }
    return out;
  }

  /// Assembles from raw CSR arrays, validating structure.
  static CsrMatrix from_parts(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                              std::vector<std::size_t> col_idx, std::vector<T> values) {
    if (row_ptr.size() != rows + 1 || row_ptr.front() != 0 || row_ptr.back() != col_idx.size() ||
        col_idx.size() != values.size()) {
      throw ShapeError("from_parts: inconsistent CSR arrays");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1]) throw ShapeError("from_parts: row_ptr not monotone");
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        if (col_idx[k] >= cols || (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1])) {
          throw ShapeError("from_parts: column indices out of range or unsorted");
        }
      }
    }
    CsrMatrix out;
    out.rows_ = rows;
    out.cols_ = cols;
    out.row_ptr_ = std::move(row_ptr);
    out.col_idx_ = std::move(col_idx);
    out.values_ = std::move(values);
    return out;
  }

  static CsrMatrix identity(std::size_t n) {
    CsrMatrix out(n, n);
    out.col_idx_.resize(n);
    out.values_.assign(n, T{1});
    for (std::size_t i = 0; i < n; ++i) {
      out.col_idx_[i] = i;
      out.row_ptr_[i + 1] = i + 1;
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<T>& values() const noexcept { return values_; }
  std::vector<T>& mutable_values() noexcept { return values_; }

  /// Entry lookup by binary search; absent entries are zero.
  T at(std::size_t r, std::size_t c) const {
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return T{};
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
  }

  T row_sum(std::size_t r) const {
    T s{};
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k];
    return s;
  }

  CsrMatrix transpose() const {
    CsrMatrix out(cols_, rows_);
    out.col_idx_.resize(nnz());
    out.values_.resize(nnz());
    for (std::size_t c : col_idx_) ++out.row_ptr_[c + 1];
    std::partial_sum(out.row_ptr_.begin(), out.row_ptr_.end(), out.row_ptr_.begin());
    std::vector<std::size_t> cursor(out.row_ptr_.begin(), out.row_ptr_.end() - 1);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const std::size_t dst = cursor[col_idx_[k]]++;
        out.col_idx_[dst] = r;
        out.values_[dst] = values_[k];
      }
    }
    return out;
  }

  DenseMatrix<T> to_dense() const {
    DenseMatrix<T> out(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out(r, col_idx_[k]) = values_[k];
    }
    return out;
  }

  bool is_square() const noexcept { return rows_ == cols_; }

  /// Exact structural and numerical symmetry.
  bool is_symmetric() const {
    if (!is_square()) return false;
    const CsrMatrix t = transpose();
    return t.row_ptr_ == row_ptr_ && t.col_idx_ == col_idx_ && t.values_ == values_;
  }

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<T> values_;
};

using SparseMatrix = CsrMatrix<double>;

/// Sparse·sparse product (row-wise Gustavson with a dense accumulator).
template <class T>
CsrMatrix<T> multiply(const CsrMatrix<T>& a, const CsrMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("spgemm: " + detail::shape_str(a.rows(), a.cols()) + " * " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  std::vector<std::size_t> row_ptr(a.rows() + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<T> values;
  std::vector<T> acc(b.cols(), T{});
  std::vector<char> touched(b.cols(), 0);
  std::vector<std::size_t> pattern;
  const auto& ap = a.row_ptr();
  const auto& ac = a.col_idx();
  const auto& av = a.values();
  const auto& bp = b.row_ptr();
  const auto& bc = b.col_idx();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    pattern.clear();
    for (std::size_t ka = ap[i]; ka < ap[i + 1]; ++ka) {
      const std::size_t k = ac[ka];
      const T aik = av[ka];
      for (std::size_t kb = bp[k]; kb < bp[k + 1]; ++kb) {
        const std::size_t j = bc[kb];
        if (!touched[j]) {
          touched[j] = 1;
          pattern.push_back(j);
        }
        acc[j] += aik * bv[kb];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (std::size_t j : pattern) {
      if (acc[j] != T{}) {
        col_idx.push_back(j);
        values.push_back(acc[j]);
      }
      acc[j] = T{};
      touched[j] = 0;
    }
    row_ptr[i + 1] = col_idx.size();
  }
  return CsrMatrix<T>::from_parts(a.rows(), b.cols(), std::move(row_ptr), std::move(col_idx),
                                  std::move(values));
}

/// Sparse·dense product.
template <class T>
DenseMatrix<T> spmm(const CsrMatrix<T>& s, const DenseMatrix<T>& d) {
  if (s.cols() != d.rows()) {
    throw ShapeError("spmm: " + detail::shape_str(s.rows(), s.cols()) + " * " +
                     detail::shape_str(d.rows(), d.cols()));
  }
  DenseMatrix<T> out(s.rows(), d.cols());
  const auto& rp = s.row_ptr();
  const auto& ci = s.col_idx();
  const auto& v = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto orow = out.row(r);
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
      const T w = v[k];
      auto drow = d.row(ci[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) orow[j] += w * drow[j];
    }
  }
  return out;
}

/// sᵀ·d computed by scattering rows of d; no transpose is materialized.
template <class T>
DenseMatrix<T> spmm_transposed(const CsrMatrix<T>& s, const DenseMatrix<T>& d) {
  if (s.rows() != d.rows()) {
    throw ShapeError("spmm_transposed: " + detail::shape_str(s.rows(), s.cols()) + "ᵀ * " +
                     detail::shape_str(d.rows(), d.cols()));
  }
  DenseMatrix<T> out(s.cols(), d.cols());
  const auto& rp = s.row_ptr();
  const auto& ci = s.col_idx();
  const auto& v = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto drow = d.row(r);
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
      const T w = v[k];
      auto orow = out.row(ci[k]);
      for (std::size_t j = 0; j < d.cols(); ++j) orow[j] += w * drow[j];
    }
  }
  return out;
}

}  // namespace hicrec
