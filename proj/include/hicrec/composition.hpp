#pragma once

#include <span>
#include <vector>

#include "hicrec/dense.hpp"
#include "hicrec/errors.hpp"

namespace hicrec {

/// s = Σ_m e_m · v_m, the factor-space image of an interest vector (V is d×K).
inline std::vector<double> factor_projection(std::span<const double> e, const Matrix& factors) {
  if (e.size() != factors.rows()) throw ShapeError("factor_projection: interest length != factor rows");
  std::vector<double> s(factors.cols(), 0.0);
  for (std::size_t m = 0; m < e.size(); ++m) {
    const double em = e[m];
    auto v = factors.row(m);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += em * v[k];
  }
  return s;
}

/// Element-wise product of a user and an item embedding.
inline std::vector<double> extract_interest(std::span<const double> user, std::span<const double> item) {
  if (user.size() != item.size()) throw ShapeError("extract_interest: embedding lengths differ");
  std::vector<double> e(user.size());
  for (std::size_t m = 0; m < e.size(); ++m) e[m] = user[m] * item[m];
  return e;
}

/// Σ_{m<n} (e_m v_m) ⊙ (e_n v_n), evaluated in linear time as
/// ½[(Σ_m e_m v_m)² − Σ_m (e_m v_m)²].
inline std::vector<double> intra_composition(std::span<const double> e, const Matrix& factors) {
  std::vector<double> out = factor_projection(e, factors);
  std::vector<double> squares(out.size(), 0.0);
  for (std::size_t m = 0; m < e.size(); ++m) {
    auto v = factors.row(m);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double t = e[m] * v[k];
      squares[k] += t * t;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = 0.5 * (out[k] * out[k] - squares[k]);
  return out;
}

/// Σ_{p<q} s_p ⊙ s_q over aspects, where s_p is the factor projection of
/// aspect p's interest, evaluated as ½[(Σ_p s_p)² − Σ_p s_p²].
inline std::vector<double> inter_composition(const std::vector<std::vector<double>>& interests,
                                             const std::vector<const Matrix*>& factors) {
  if (interests.size() != factors.size() || interests.empty()) {
    throw ShapeError("inter_composition: need one factor matrix per interest and at least one aspect");
  }
  const std::size_t k_dim = factors.front()->cols();
  std::vector<double> sum(k_dim, 0.0);
  std::vector<double> squares(k_dim, 0.0);
  for (std::size_t p = 0; p < interests.size(); ++p) {
    if (factors[p]->cols() != k_dim) throw ShapeError("inter_composition: factor widths differ");
    const auto s = factor_projection(interests[p], *factors[p]);
    for (std::size_t k = 0; k < k_dim; ++k) {
      sum[k] += s[k];
      squares[k] += s[k] * s[k];
    }
  }
  for (std::size_t k = 0; k < k_dim; ++k) sum[k] = 0.5 * (sum[k] * sum[k] - squares[k]);
  return sum;
}

}  // namespace hicrec
