#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hicrec/composition.hpp"
#include "hicrec/dense.hpp"
#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/metapath.hpp"
#include "hicrec/params.hpp"
#include "hicrec/sparse.hpp"

namespace hicrec {

enum class ModelKind { hicrec, hicrec_linear, hicrec_mlp, mf_bpr };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::hicrec: return "hicrec";
    case ModelKind::hicrec_linear: return "hicrec-linear";
    case ModelKind::hicrec_mlp: return "hicrec-mlp";
    case ModelKind::mf_bpr: return "mf-bpr";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  if (s == "hicrec") return ModelKind::hicrec;
  if (s == "hicrec-linear") return ModelKind::hicrec_linear;
  if (s == "hicrec-mlp") return ModelKind::hicrec_mlp;
  if (s == "mf-bpr") return ModelKind::mf_bpr;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

struct ModelConfig {
  ModelKind kind = ModelKind::hicrec;
  std::size_t dim = 32;      // embedding width d
  std::size_t factors = 32;  // composition factor width K
  std::size_t layers = 2;    // encoder depth L
  /// Share GCN layer weights across aspects, not only between the user and
  /// item graph of one aspect.
  bool share_across_aspects = false;

  bool operator==(const ModelConfig&) const = default;
};

/// Activations kept for the backward pass of one encoder branch.
struct BranchCache {
  std::vector<Matrix> inputs;   // inputs[l] feeds layer l
  std::vector<Matrix> preacts;  // preacts[0] is the projection, preacts[l + 1] layer l
  Matrix output;
};

/// Final user and item embeddings of one aspect (row u is e_p^u).
struct AspectEmbeddings {
  BranchCache users;
  BranchCache items;

  const Matrix& user_embeddings() const { return users.output; }
  const Matrix& item_embeddings() const { return items.output; }
};

struct ForwardState {
  std::vector<AspectEmbeddings> aspects;
};

struct ScoreBreakdown {
  double linear = 0.0;
  std::vector<std::vector<double>> intra;
  std::vector<double> inter;
  std::vector<double> ic;
  double total = 0.0;
};

inline double bpr_loss(double r_pos, double r_neg) { return softplus(-(r_pos - r_neg)); }

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct LayerRefs {
  std::vector<const Matrix*> weights;
  std::vector<const Matrix*> biases;
};

/// Projection + ReLU, then `layers` rounds of ReLU(A·H·W + b). A null
/// adjacency means a plain fully connected layer.
inline BranchCache encode_branch(const SparseMatrix& features, const SparseMatrix* adjacency,
                                 const Matrix& proj_w, const Matrix& proj_b, const LayerRefs& layers) {
  if (features.cols() != proj_w.rows()) {
    throw ShapeError("encoder: feature width " + std::to_string(features.cols()) +
                     " != projection rows " + std::to_string(proj_w.rows()));
  }
  BranchCache cache;
  Matrix z = spmm(features, proj_w);
  add_row_bias(z, proj_b);
  Matrix h = relu(z);
  cache.preacts.push_back(std::move(z));
  for (std::size_t l = 0; l < layers.weights.size(); ++l) {
    Matrix t = matmul(h, *layers.weights[l]);
    Matrix y = adjacency ? spmm(*adjacency, t) : std::move(t);
    add_row_bias(y, *layers.biases[l]);
    Matrix next = relu(y);
    cache.inputs.push_back(std::move(h));
    cache.preacts.push_back(std::move(y));
    h = std::move(next);
  }
  cache.output = std::move(h);
  return cache;
}

struct LayerGrads {
  std::vector<ParamTensor*> weights;
  std::vector<ParamTensor*> biases;
};

inline void backward_branch(const BranchCache& cache, const SparseMatrix& features, const SparseMatrix* adjacency,
                            Matrix upstream, ParamTensor& proj_w, ParamTensor& proj_b, const LayerGrads& layers) {
  for (std::size_t l = layers.weights.size(); l-- > 0;) {
    const Matrix dy = relu_grad(cache.preacts[l + 1], upstream);
    accumulate_column_sums(layers.biases[l]->grad, dy);
    const Matrix dt = adjacency ? spmm_transposed(*adjacency, dy) : dy;
    accumulate(layers.weights[l]->grad, matmul_tn(cache.inputs[l], dt));
    upstream = matmul_nt(dt, layers.weights[l]->value);
  }
  const Matrix dz = relu_grad(cache.preacts[0], upstream);
  accumulate_column_sums(proj_b.grad, dz);
  accumulate(proj_w.grad, spmm_transposed(features, dz));
}

}  // namespace detail

/// The HicRec scorer and its ablations. Aspects are borrowed and must
/// outlive the model.
class HicRecModel {
 public:
  HicRecModel(ModelConfig config, std::vector<const Aspect*> aspects, std::size_t num_users, std::size_t num_items)
      : config_(config), aspects_(std::move(aspects)), num_users_(num_users), num_items_(num_items) {
    if (config_.dim == 0 || config_.factors == 0) throw ConfigError("d and K must be >= 1");
    if (config_.kind == ModelKind::mf_bpr) {
      aspects_.clear();
      return;
    }
    if (config_.layers == 0) throw ConfigError("encoder depth L must be >= 1");
    if (aspects_.empty()) throw ConfigError("HicRec variants need at least one aspect");
    for (const Aspect* a : aspects_) {
      if (a->user_feat.rows() != num_users || a->item_feat.rows() != num_items || a->user_adj.rows() != num_users ||
          a->item_adj.rows() != num_items) {
        throw ShapeError("aspect '" + a->name + "' does not match the user/item universe");
      }
    }
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_aspects() const noexcept { return aspects_.size(); }
  const std::vector<const Aspect*>& aspects() const noexcept { return aspects_; }

  bool composes() const { return config_.kind == ModelKind::hicrec || config_.kind == ModelKind::hicrec_mlp; }

  static std::string aspect_param(const std::string& aspect, std::string_view leaf) {
    return "aspect." + aspect + "." + std::string(leaf);
  }

  std::string layer_param(std::size_t p, std::size_t l, std::string_view leaf) const {
    const char* kind = config_.kind == ModelKind::hicrec_mlp ? "mlp" : "gcn";
    const std::string suffix = std::string(kind) + "." + std::to_string(l) + "." + std::string(leaf);
    if (config_.share_across_aspects) return "shared." + suffix;
    return aspect_param(aspects_[p]->name, suffix);
  }

  /// Glorot-uniform weights, zero biases. Each tensor's stream depends on
  /// `seed` and its name only, so variants sharing a tensor name start from
  /// the same values.
  ParamStore init_params(std::uint64_t seed) const {
    ParamStore store;
    const auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
      const std::uint64_t stream = detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a(name)));
      store.add(std::move(name), xavier_init<double>(rows, cols, stream));
    };
    const auto bias = [&](std::string name, std::size_t cols) { store.add(std::move(name), Matrix(1, cols)); };
    const std::size_t d = config_.dim;
    if (config_.kind == ModelKind::mf_bpr) {
      weight("mf.user", num_users_, d);
      weight("mf.item", num_items_, d);
      return store;
    }
    for (std::size_t p = 0; p < aspects_.size(); ++p) {
      const std::string& name = aspects_[p]->name;
      weight(aspect_param(name, "proj_user.W"), num_users_, d);
      bias(aspect_param(name, "proj_user.b"), d);
      weight(aspect_param(name, "proj_item.W"), num_items_, d);
      bias(aspect_param(name, "proj_item.b"), d);
      for (std::size_t l = 0; l < config_.layers; ++l) {
        if (store.contains(layer_param(p, l, "W"))) continue;
        weight(layer_param(p, l, "W"), d, d);
        bias(layer_param(p, l, "b"), d);
      }
      if (composes()) weight(aspect_param(name, "V"), d, config_.factors);
    }
    if (composes()) weight("w_rec", config_.factors, 1);
    return store;
  }

  /// Encodes every aspect's user graph and item graph.
  AspectEmbeddings encode_aspect(std::size_t p, const ParamStore& params) const {
    const Aspect& a = *aspects_[p];
    detail::LayerRefs layers;
    for (std::size_t l = 0; l < config_.layers; ++l) {
      layers.weights.push_back(&params.value(layer_param(p, l, "W")));
      layers.biases.push_back(&params.value(layer_param(p, l, "b")));
    }
    const bool graph = config_.kind != ModelKind::hicrec_mlp;
    AspectEmbeddings out;
    out.users = detail::encode_branch(a.user_feat, graph ? &a.user_adj : nullptr,
                                      params.value(aspect_param(a.name, "proj_user.W")),
                                      params.value(aspect_param(a.name, "proj_user.b")), layers);
    out.items = detail::encode_branch(a.item_feat, graph ? &a.item_adj : nullptr,
                                      params.value(aspect_param(a.name, "proj_item.W")),
                                      params.value(aspect_param(a.name, "proj_item.b")), layers);
    return out;
  }

  ForwardState forward(const ParamStore& params) const {
    ForwardState state;
    if (config_.kind == ModelKind::mf_bpr) {
      AspectEmbeddings e;
      e.users.output = params.value("mf.user");
      e.items.output = params.value("mf.item");
      state.aspects.push_back(std::move(e));
      return state;
    }
    for (std::size_t p = 0; p < aspects_.size(); ++p) state.aspects.push_back(encode_aspect(p, params));
    return state;
  }

  /// Full decomposition of r̂(u, i).
  ScoreBreakdown predict(NodeId u, NodeId i, const ForwardState& state, const ParamStore& params) const {
    ScoreBreakdown out;
    std::vector<std::vector<double>> interests;
    std::vector<const Matrix*> factors;
    for (std::size_t p = 0; p < state.aspects.size(); ++p) {
      auto eu = state.aspects[p].user_embeddings().row(u);
      auto ei = state.aspects[p].item_embeddings().row(i);
      out.linear += row_dot<double>(eu, ei);
      if (composes()) {
        interests.push_back(extract_interest(eu, ei));
        factors.push_back(&params.value(aspect_param(aspects_[p]->name, "V")));
      }
    }
    out.total = out.linear;
    if (!composes()) return out;
    out.inter = inter_composition(interests, factors);
    out.ic = out.inter;
    for (std::size_t p = 0; p < interests.size(); ++p) {
      out.intra.push_back(intra_composition(interests[p], *factors[p]));
      for (std::size_t k = 0; k < out.ic.size(); ++k) out.ic[k] += out.intra[p][k];
    }
    const Matrix& w = params.value("w_rec");
    for (std::size_t k = 0; k < out.ic.size(); ++k) out.total += w(k, 0) * out.ic[k];
    return out;
  }

  /// On/off state of every ReLU in the encoders, one byte per unit.
  std::vector<std::uint8_t> activation_pattern(const ParamStore& params) const {
    std::vector<std::uint8_t> out;
    if (config_.kind == ModelKind::mf_bpr) return out;
    const ForwardState st = forward(params);
    for (const auto& a : st.aspects) {
      for (const BranchCache* b : {&a.users, &a.items}) {
        for (const Matrix& z : b->preacts) {
          for (double x : z.values()) out.push_back(x > 0.0 ? 1 : 0);
        }
      }
    }
    return out;
  }

  /// r̂(u, i) via the combined closed form ½[S² − Σ_p Σ_m e²v²] of the
  /// composed interest, which avoids building the breakdown.
  double score(NodeId u, NodeId i, const ForwardState& state, const ParamStore& params) const {
    PairWork work;
    return score_pair(u, i, state, params, work);
  }

  /// Mean BPR loss over the triples plus lambda·‖Φ‖².
  double total_loss(std::span<const BprTriple> triples, const ForwardState& state, const ParamStore& params,
                    double lambda) const {
    if (triples.empty()) throw ContractViolation("total_loss: empty batch");
    PairWork pos;
    PairWork neg;
    double sum = 0.0;
    for (const auto& t : triples) {
      sum += bpr_loss(score_pair(t.user, t.pos_item, state, params, pos),
                      score_pair(t.user, t.neg_item, state, params, neg));
    }
    return sum / static_cast<double>(triples.size()) + lambda * params.squared_norm();
  }

  /// Accumulates d(total_loss)/dθ into every ParamTensor's grad and returns
  /// the loss. Gradients are added, not overwritten.
  double backward(std::span<const BprTriple> triples, const ForwardState& state, ParamStore& params,
                  double lambda) const {
    if (triples.empty()) throw ContractViolation("backward: empty batch");
    if (state.aspects.size() != std::max<std::size_t>(aspects_.size(), 1)) {
      throw ContractViolation("backward: forward state does not match the model");
    }
    const std::size_t d = config_.dim;
    std::vector<Matrix> d_users;
    std::vector<Matrix> d_items;
    for (std::size_t p = 0; p < state.aspects.size(); ++p) {
      d_users.emplace_back(num_users_, d);
      d_items.emplace_back(num_items_, d);
    }
    std::vector<ParamTensor*> v_grads;
    ParamTensor* w_rec = nullptr;
    if (composes()) {
      for (const Aspect* a : aspects_) v_grads.push_back(&params.at(aspect_param(a->name, "V")));
      w_rec = &params.at("w_rec");
    }

    const double inv_b = 1.0 / static_cast<double>(triples.size());
    PairWork pos;
    PairWork neg;
    double sum = 0.0;
    for (const auto& t : triples) {
      const double margin = score_pair(t.user, t.pos_item, state, params, pos) -
                            score_pair(t.user, t.neg_item, state, params, neg);
      sum += softplus(-margin);
      const double g = -sigmoid(-margin) * inv_b;
      accumulate_pair_grad(t.user, t.pos_item, g, state, pos, d_users, d_items, v_grads, w_rec);
      accumulate_pair_grad(t.user, t.neg_item, -g, state, neg, d_users, d_items, v_grads, w_rec);
    }

    if (config_.kind == ModelKind::mf_bpr) {
      accumulate(params.at("mf.user").grad, d_users[0]);
      accumulate(params.at("mf.item").grad, d_items[0]);
    } else {
      const bool graph = config_.kind != ModelKind::hicrec_mlp;
      for (std::size_t p = 0; p < aspects_.size(); ++p) {
        const Aspect& a = *aspects_[p];
        detail::LayerGrads layers;
        for (std::size_t l = 0; l < config_.layers; ++l) {
          layers.weights.push_back(&params.at(layer_param(p, l, "W")));
          layers.biases.push_back(&params.at(layer_param(p, l, "b")));
        }
        // The layer weights are shared by both branches, so both add into them.
        detail::backward_branch(state.aspects[p].users, a.user_feat, graph ? &a.user_adj : nullptr,
                                std::move(d_users[p]), params.at(aspect_param(a.name, "proj_user.W")),
                                params.at(aspect_param(a.name, "proj_user.b")), layers);
        detail::backward_branch(state.aspects[p].items, a.item_feat, graph ? &a.item_adj : nullptr,
                                std::move(d_items[p]), params.at(aspect_param(a.name, "proj_item.W")),
                                params.at(aspect_param(a.name, "proj_item.b")), layers);
      }
    }
    params.add_l2_grad(lambda);
    return sum * inv_b + lambda * params.squared_norm();
  }

 private:
  struct PairWork {
    std::vector<std::vector<double>> interests;
    std::vector<double> sum;  // S = Σ_p V_pᵀ e_p
    std::vector<double> ic;
  };

  double score_pair(NodeId u, NodeId i, const ForwardState& state, const ParamStore& params, PairWork& work) const {
    const std::size_t n_asp = state.aspects.size();
    work.interests.resize(n_asp);
    double total = 0.0;
    for (std::size_t p = 0; p < n_asp; ++p) {
      auto eu = state.aspects[p].user_embeddings().row(u);
      auto ei = state.aspects[p].item_embeddings().row(i);
      work.interests[p] = extract_interest(eu, ei);
      for (double x : work.interests[p]) total += x;
    }
    if (!composes()) return total;
    const std::size_t k_dim = config_.factors;
    work.sum.assign(k_dim, 0.0);
    std::vector<double> sq(k_dim, 0.0);
    for (std::size_t p = 0; p < n_asp; ++p) {
      const Matrix& v = params.value(aspect_param(aspects_[p]->name, "V"));
      const auto& e = work.interests[p];
      for (std::size_t m = 0; m < e.size(); ++m) {
        auto vm = v.row(m);
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double t = e[m] * vm[k];
          work.sum[k] += t;
          sq[k] += t * t;
        }
      }
    }
    work.ic.resize(k_dim);
    const Matrix& w = params.value("w_rec");
    for (std::size_t k = 0; k < k_dim; ++k) {
      work.ic[k] = 0.5 * (work.sum[k] * work.sum[k] - sq[k]);
      total += w(k, 0) * work.ic[k];
    }
    return total;
  }

  void accumulate_pair_grad(NodeId u, NodeId i, double g, const ForwardState& state, const PairWork& work,
                            std::vector<Matrix>& d_users, std::vector<Matrix>& d_items,
                            const std::vector<ParamTensor*>& v_grads, ParamTensor* w_rec) const {
    const std::size_t d = config_.dim;
    std::vector<double> de(d);
    for (std::size_t p = 0; p < state.aspects.size(); ++p) {
      const auto& e = work.interests[p];
      std::fill(de.begin(), de.end(), 1.0);
      if (composes()) {
        const Matrix& v = v_grads[p]->value;
        Matrix& dv = v_grads[p]->grad;
        const Matrix& w = w_rec->value;
        for (std::size_t m = 0; m < d; ++m) {
          auto vm = v.row(m);
          auto dvm = dv.row(m);
          double acc = 0.0;
          for (std::size_t k = 0; k < config_.factors; ++k) {
            const double wk = w(k, 0);
            acc += wk * (work.sum[k] * vm[k] - e[m] * vm[k] * vm[k]);
            dvm[k] += g * wk * (work.sum[k] * e[m] - e[m] * e[m] * vm[k]);
          }
          de[m] += acc;
        }
      }
      auto eu = state.aspects[p].user_embeddings().row(u);
      auto ei = state.aspects[p].item_embeddings().row(i);
      auto du = d_users[p].row(u);
      auto di = d_items[p].row(i);
      for (std::size_t m = 0; m < d; ++m) {
        du[m] += g * de[m] * ei[m];
        di[m] += g * de[m] * eu[m];
      }
    }
    if (composes()) {
      for (std::size_t k = 0; k < config_.factors; ++k) w_rec->grad(k, 0) += g * work.ic[k];
    }
  }

  ModelConfig config_;
  std::vector<const Aspect*> aspects_;
  std::size_t num_users_;
  std::size_t num_items_;
};

}  // namespace hicrec
