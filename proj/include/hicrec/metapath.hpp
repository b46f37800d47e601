#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/sparse.hpp"

namespace hicrec {

/// A sequence of node types; consecutive types must share a relation.
struct MetaPath {
  std::vector<std::size_t> types;
  std::string text;

  std::size_t front() const { return types.front(); }
  std::size_t back() const { return types.back(); }
  bool is_palindrome() const { return std::equal(types.begin(), types.end(), types.rbegin()); }
  bool operator==(const MetaPath&) const = default;
};

/// Tokenizes "UIBIU" by longest-matching type symbols, or "U.I.Ca.I.U" when
/// dots are present, and validates each hop against the graph's relations.
inline MetaPath parse_metapath(std::string_view text, const HinGraph& graph) {
  MetaPath path;
  path.text = std::string(text);
  const auto& types = graph.node_types();
  if (text.find('.') != std::string_view::npos) {
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t dot = std::min(text.find('.', start), text.size());
      const std::string_view tok = text.substr(start, dot - start);
      auto t = graph.find_type(tok);
      if (!t) throw SchemaError("meta-path '" + path.text + "': unknown type token '" + std::string(tok) + "'");
      path.types.push_back(*t);
      start = dot + 1;
    }
  } else {
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t best_len = 0;
      std::size_t best = 0;
      for (std::size_t t = 0; t < types.size(); ++t) {
        const auto& sym = types[t].symbol;
        if (sym.size() > best_len && text.substr(pos, sym.size()) == sym) {
          best_len = sym.size();
          best = t;
        }
      }
      if (best_len == 0) {
        throw SchemaError("meta-path '" + path.text + "': unknown type token at offset " + std::to_string(pos));
      }
      path.types.push_back(best);
      pos += best_len;
    }
  }
  if (path.types.size() < 2) throw SchemaError("meta-path '" + path.text + "' needs at least two node types");
  for (std::size_t k = 0; k + 1 < path.types.size(); ++k) {
    if (!graph.find_relation(path.types[k], path.types[k + 1])) {
      throw SchemaError("meta-path '" + path.text + "': no relation between " + types[path.types[k]].symbol +
                        " and " + types[path.types[k + 1]].symbol);
    }
  }
  return path;
}

/// Chained product of hop adjacencies, strictly left to right. Entry (i, j)
/// is the weighted number of path instances from i to j.
inline SparseMatrix commuting_matrix(const MetaPath& path, const HinGraph& graph) {
  if (path.types.size() < 2) throw ContractViolation("commuting_matrix: path too short");
  auto first = graph.oriented_adjacency(path.types[0], path.types[1]);
  if (!first) throw ContractViolation("commuting_matrix: path not valid for graph");
  SparseMatrix product = std::move(*first);
  for (std::size_t k = 1; k + 1 < path.types.size(); ++k) {
    auto hop = graph.oriented_adjacency(path.types[k], path.types[k + 1]);
    if (!hop) throw ContractViolation("commuting_matrix: path not valid for graph");
    if (product.cols() != hop->rows()) throw ContractViolation("commuting_matrix: dimension mismatch");
    product = multiply(product, *hop);
  }
  return product;
}

/// s(i,j) = 2·C_ij / (C_ii + C_jj), zero when the denominator vanishes.
/// The result keeps C's sparsity pattern.
inline SparseMatrix pathsim(const SparseMatrix& c) {
  if (!c.is_square()) throw ContractViolation("pathsim: commuting matrix must be square");
  const std::size_t n = c.rows();
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = c.at(i, i);
    if (diag[i] < 0.0) throw ContractViolation("pathsim: negative diagonal entry");
  }
  const auto& rp = c.row_ptr();
  const auto& ci = c.col_idx();
  const auto& v = c.values();
  std::vector<double> values(v.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const double denom = diag[i] + diag[ci[k]];
      values[k] = denom > 0.0 ? 2.0 * v[k] / denom : 0.0;
    }
  }
  std::vector<Triplet<double>> entries;
  entries.reserve(values.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      if (values[k] != 0.0) entries.push_back({i, ci[k], values[k]});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(entries));
}

enum class AdjacencyNorm { symmetric, none };

/// D^{-1/2}(C + I)D^{-1/2} with D the row sums of C + I, or C unchanged for
/// AdjacencyNorm::none.
inline SparseMatrix normalize_adjacency(const SparseMatrix& c, AdjacencyNorm mode = AdjacencyNorm::symmetric) {
  if (!c.is_square()) throw ShapeError("normalize_adjacency: matrix must be square");
  if (mode == AdjacencyNorm::none) return c;
  const std::size_t n = c.rows();
  std::vector<Triplet<double>> entries;
  entries.reserve(c.nnz() + n);
  const auto& rp = c.row_ptr();
  const auto& ci = c.col_idx();
  const auto& v = c.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) entries.push_back({i, ci[k], v[k]});
    entries.push_back({i, i, 1.0});
  }
  SparseMatrix with_loops = SparseMatrix::from_triplets(n, n, std::move(entries));
  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) degree[i] = with_loops.row_sum(i);
  auto& vals = with_loops.mutable_values();
  const auto& wrp = with_loops.row_ptr();
  const auto& wci = with_loops.col_idx();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = wrp[i]; k < wrp[i + 1]; ++k) vals[k] /= std::sqrt(degree[i] * degree[wci[k]]);
  }
  return with_loops;
}

/// (C + Cᵀ) / 2, exactly symmetric.
inline SparseMatrix symmetrize(const SparseMatrix& c) {
  if (c.is_symmetric()) return c;
  const SparseMatrix t = c.transpose();
  std::vector<Triplet<double>> entries;
  entries.reserve(2 * c.nnz());
  for (const SparseMatrix* m : {&c, &t}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      for (std::size_t k = m->row_ptr()[i]; k < m->row_ptr()[i + 1]; ++k) {
        entries.push_back({i, m->col_idx()[k], 0.5 * m->values()[k]});
      }
    }
  }
  return SparseMatrix::from_triplets(c.rows(), c.cols(), std::move(entries));
}

/// A user meta-path and an item meta-path about the same topic, with the
/// graphs and features derived from them.
struct Aspect {
  std::string name;
  MetaPath user_path;
  MetaPath item_path;
  SparseMatrix user_adj;
  SparseMatrix item_adj;
  SparseMatrix user_feat;
  SparseMatrix item_feat;

  std::size_t num_users() const { return user_adj.rows(); }
  std::size_t num_items() const { return item_adj.rows(); }
  bool operator==(const Aspect&) const = default;
};

inline Aspect build_aspect(std::string name, const MetaPath& user_path, const MetaPath& item_path,
                           const HinGraph& graph, AdjacencyNorm norm = AdjacencyNorm::symmetric) {
  const auto check = [&](const MetaPath& p, std::size_t type, const char* role) {
    if (p.front() != type || p.back() != type) {
      throw SchemaError("aspect '" + name + "': " + role + " meta-path '" + p.text + "' must start and end at " +
                        graph.node_types()[type].symbol);
    }
    if (!p.is_palindrome()) {
      throw SchemaError("aspect '" + name + "': " + role + " meta-path '" + p.text + "' must be symmetric");
    }
  };
  check(user_path, graph.user_type(), "user");
  check(item_path, graph.item_type(), "item");

  // Palindromic paths give symmetric matrices up to summation order.
  const SparseMatrix cu = symmetrize(commuting_matrix(user_path, graph));
  const SparseMatrix ci = symmetrize(commuting_matrix(item_path, graph));
  Aspect a;
  a.name = std::move(name);
  a.user_path = user_path;
  a.item_path = item_path;
  a.user_feat = pathsim(cu);
  a.item_feat = pathsim(ci);
  a.user_adj = normalize_adjacency(cu, norm);
  a.item_adj = normalize_adjacency(ci, norm);
  return a;
}

inline Aspect build_aspect(std::string name, std::string_view user_path, std::string_view item_path,
                           const HinGraph& graph, AdjacencyNorm norm = AdjacencyNorm::symmetric) {
  return build_aspect(std::move(name), parse_metapath(user_path, graph), parse_metapath(item_path, graph), graph,
                      norm);
}

}  // namespace hicrec
