#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/sparse.hpp"

namespace hicrec {

using NodeId = std::uint32_t;

struct NodeType {
  std::string symbol;
  std::size_t count = 0;
};

/// Typed edges between two node types; adjacency is |src| × |dst|.
struct Relation {
  std::size_t src = 0;
  std::size_t dst = 0;
  SparseMatrix adjacency;
};

/// Declared node types plus the user/item designation. A pinned count of 0
/// means "infer from the largest observed id".
struct SchemaSpec {
  struct TypeDecl {
    std::string symbol;
    std::size_t pinned_count = 0;
    bool operator==(const TypeDecl&) const = default;
  };
  std::vector<TypeDecl> types;
  std::string user_symbol;
  std::string item_symbol;

  std::optional<std::size_t> find(std::string_view symbol) const {
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (types[i].symbol == symbol) return i;
    }
    return std::nullopt;
  }

  bool operator==(const SchemaSpec&) const = default;
};

class HinGraph {
 public:
  HinGraph(std::vector<NodeType> node_types, std::vector<Relation> relations, std::size_t user_type,
           std::size_t item_type)
      : node_types_(std::move(node_types)),
        relations_(std::move(relations)),
        user_type_(user_type),
        item_type_(item_type) {
    if (node_types_.size() + relations_.size() <= 2) {
      throw SchemaError("a heterogeneous graph needs |node types| + |relations| > 2");
    }
    if (user_type_ >= node_types_.size() || item_type_ >= node_types_.size() || user_type_ == item_type_) {
      throw SchemaError("user and item types must be two distinct declared types");
    }
    for (std::size_t i = 0; i < node_types_.size(); ++i) {
      if (node_types_[i].count == 0) {
        throw SchemaError("node type '" + node_types_[i].symbol + "' has no nodes");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (node_types_[i].symbol == node_types_[j].symbol) {
          throw SchemaError("duplicate node type '" + node_types_[i].symbol + "'");
        }
      }
    }
    for (const auto& r : relations_) {
      if (r.src >= node_types_.size() || r.dst >= node_types_.size()) {
        throw SchemaError("relation references an undeclared node type");
      }
      if (r.adjacency.rows() != node_types_[r.src].count || r.adjacency.cols() != node_types_[r.dst].count) {
        throw SchemaError("relation " + node_types_[r.src].symbol + "-" + node_types_[r.dst].symbol +
                          " adjacency does not match declared node counts");
      }
      for (double w : r.adjacency.values()) {
        if (w < 0.0) throw SchemaError("negative edge weight");
      }
    }
  }

  const std::vector<NodeType>& node_types() const noexcept { return node_types_; }
  const std::vector<Relation>& relations() const noexcept { return relations_; }
  std::size_t user_type() const noexcept { return user_type_; }
  std::size_t item_type() const noexcept { return item_type_; }
  std::size_t num_users() const { return node_types_[user_type_].count; }
  std::size_t num_items() const { return node_types_[item_type_].count; }

  std::optional<std::size_t> find_type(std::string_view symbol) const {
    for (std::size_t i = 0; i < node_types_.size(); ++i) {
      if (node_types_[i].symbol == symbol) return i;
    }
    return std::nullopt;
  }

  /// Adjacency from type `from` to type `to`, transposing a relation stored the
  /// other way round. Empty when no relation connects the two types.
  std::optional<SparseMatrix> oriented_adjacency(std::size_t from, std::size_t to) const {
    for (const auto& r : relations_) {
      if (r.src == from && r.dst == to) return r.adjacency;
    }
    for (const auto& r : relations_) {
      if (r.src == to && r.dst == from) return r.adjacency.transpose();
    }
    return std::nullopt;
  }

  const Relation* find_relation(std::size_t a, std::size_t b) const {
    for (const auto& r : relations_) {
      if ((r.src == a && r.dst == b) || (r.src == b && r.dst == a)) return &r;
    }
    return nullptr;
  }

 private:
  std::vector<NodeType> node_types_;
  std::vector<Relation> relations_;
  std::size_t user_type_;
  std::size_t item_type_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != '\t' && line[i] != ' ' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool skippable_line(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

template <class Int>
Int parse_int(std::string_view field, const std::string& source, std::size_t line, const char* what) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(source, line, std::string("malformed ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

inline double parse_double(std::string_view field, const std::string& source, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(source, line, "malformed weight '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace detail

/// Accumulates typed edges; duplicate edges sum their weights.
class HinBuilder {
 public:
  explicit HinBuilder(SchemaSpec schema) : schema_(std::move(schema)), max_seen_(schema_.types.size(), 0) {
    if (!schema_.find(schema_.user_symbol)) throw SchemaError("user type '" + schema_.user_symbol + "' not declared");
    if (!schema_.find(schema_.item_symbol)) throw SchemaError("item type '" + schema_.item_symbol + "' not declared");
  }

  const SchemaSpec& schema() const noexcept { return schema_; }

  std::size_t type_index(std::string_view symbol) const {
    auto t = schema_.find(symbol);
    if (!t) throw SchemaError("unknown node type '" + std::string(symbol) + "'");
    return *t;
  }

  /// Records that node `id` of type `type` exists, growing inferred counts.
  void observe(std::size_t type, std::uint64_t id) {
    const std::size_t pinned = schema_.types[type].pinned_count;
    if (pinned != 0 && id >= pinned) {
      throw RangeError("id " + std::to_string(id) + " out of range for type '" + schema_.types[type].symbol +
                       "' (count " + std::to_string(pinned) + ")");
    }
    max_seen_[type] = std::max<std::size_t>(max_seen_[type], static_cast<std::size_t>(id) + 1);
  }

  void add_edge(std::size_t src_type, std::uint64_t src_id, std::size_t dst_type, std::uint64_t dst_id,
                double weight = 1.0) {
    if (!(weight >= 0.0)) throw RangeError("edge weight must be nonnegative");
    observe(src_type, src_id);
    observe(dst_type, dst_id);
    if (edges_.contains({dst_type, src_type}) && src_type != dst_type) {
      edges_[{dst_type, src_type}].push_back({static_cast<std::size_t>(dst_id), static_cast<std::size_t>(src_id), weight});
    } else {
      edges_[{src_type, dst_type}].push_back({static_cast<std::size_t>(src_id), static_cast<std::size_t>(dst_id), weight});
    }
    if (std::find(order_.begin(), order_.end(), std::pair{src_type, dst_type}) == order_.end() &&
        std::find(order_.begin(), order_.end(), std::pair{dst_type, src_type}) == order_.end()) {
      order_.emplace_back(src_type, dst_type);
    }
  }

  void add_edge(std::string_view src_symbol, std::uint64_t src_id, std::string_view dst_symbol,
                std::uint64_t dst_id, double weight = 1.0) {
    add_edge(type_index(src_symbol), src_id, type_index(dst_symbol), dst_id, weight);
  }

  /// Reads `src_type src_id dst_type dst_id [weight]` rows; `#` lines are comments.
  void add_edge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open edge list " + path.string());
    const std::string source = path.string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::skippable_line(line)) continue;
      const auto f = detail::split_fields(line);
      if (f.size() != 4 && f.size() != 5) {
        throw ParseError(source, lineno, "expected 4 or 5 fields, got " + std::to_string(f.size()));
      }
      auto src = schema_.find(f[0]);
      auto dst = schema_.find(f[2]);
      if (!src) throw SchemaError(source + ":" + std::to_string(lineno) + ": unknown node type '" + std::string(f[0]) + "'");
      if (!dst) throw SchemaError(source + ":" + std::to_string(lineno) + ": unknown node type '" + std::string(f[2]) + "'");
      const auto sid = detail::parse_int<std::uint64_t>(f[1], source, lineno, "node id");
      const auto did = detail::parse_int<std::uint64_t>(f[3], source, lineno, "node id");
      const double w = f.size() == 5 ? detail::parse_double(f[4], source, lineno) : 1.0;
      if (!(w >= 0.0)) throw ParseError(source, lineno, "negative edge weight");
      try {
        add_edge(*src, sid, *dst, did, w);
      } catch (const RangeError& e) {
        throw RangeError(source + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  /// Pinned count, or one past the largest id observed so far.
  std::size_t count(std::size_t type) const {
    const std::size_t pinned = schema_.types[type].pinned_count;
    return pinned != 0 ? pinned : max_seen_[type];
  }

  bool has_relation(std::size_t a, std::size_t b) const {
    return edges_.contains({a, b}) || edges_.contains({b, a});
  }

  HinGraph build() const {
    std::vector<NodeType> types;
    for (std::size_t t = 0; t < schema_.types.size(); ++t) {
      const auto& decl = schema_.types[t];
      types.push_back({decl.symbol, decl.pinned_count != 0 ? decl.pinned_count : max_seen_[t]});
    }
    std::vector<Relation> relations;
    for (const auto& key : order_) {
      const auto it = edges_.find(key);
      relations.push_back({key.first, key.second,
                           SparseMatrix::from_triplets(types[key.first].count, types[key.second].count, it->second)});
    }
    return HinGraph(std::move(types), std::move(relations), *schema_.find(schema_.user_symbol),
                    *schema_.find(schema_.item_symbol));
  }

 private:
  SchemaSpec schema_;
  std::vector<std::size_t> max_seen_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Triplet<double>>> edges_;
  std::vector<std::pair<std::size_t, std::size_t>> order_;
};

inline HinGraph load_edge_list(const std::filesystem::path& path, const SchemaSpec& schema) {
  HinBuilder builder(schema);
  builder.add_edge_file(path);
  return builder.build();
}

struct Interaction {
  NodeId user = 0;
  NodeId item = 0;
  std::optional<std::int64_t> timestamp;
  std::size_t seq = 0;  // position in the source file
};

/// Reads `U uid I iid [timestamp]` rows. Rating values are not part of the
/// format; every listed pair is an implicit positive.
inline std::vector<Interaction> load_interactions(const std::filesystem::path& path, const SchemaSpec& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file " + path.string());
  const std::string source = path.string();
  const std::size_t user_type = *schema.find(schema.user_symbol);
  const std::size_t item_type = *schema.find(schema.item_symbol);
  std::vector<Interaction> out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<bool> timed;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable_line(line)) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 4 && f.size() != 5) {
      throw ParseError(source, lineno, "expected 4 or 5 fields, got " + std::to_string(f.size()));
    }
    if (f[0] != schema.user_symbol || f[2] != schema.item_symbol) {
      if (!schema.find(f[0]) || !schema.find(f[2])) {
        throw SchemaError(source + ":" + std::to_string(lineno) + ": unknown node type");
      }
      throw SchemaError(source + ":" + std::to_string(lineno) + ": interaction rows must be " +
                        schema.user_symbol + " -> " + schema.item_symbol);
    }
    Interaction x;
    const auto u = detail::parse_int<std::uint64_t>(f[1], source, lineno, "user id");
    const auto i = detail::parse_int<std::uint64_t>(f[3], source, lineno, "item id");
    const std::size_t pin_u = schema.types[user_type].pinned_count;
    const std::size_t pin_i = schema.types[item_type].pinned_count;
    if ((pin_u != 0 && u >= pin_u) || (pin_i != 0 && i >= pin_i) || u > UINT32_MAX || i > UINT32_MAX) {
      throw RangeError(source + ":" + std::to_string(lineno) + ": id out of declared range");
    }
    x.user = static_cast<NodeId>(u);
    x.item = static_cast<NodeId>(i);
    if (f.size() == 5) x.timestamp = detail::parse_int<std::int64_t>(f[4], source, lineno, "timestamp");
    if (timed && *timed != x.timestamp.has_value()) {
      throw ParseError(source, lineno, "timestamps must be given on all rows or none");
    }
    timed = x.timestamp.has_value();
    x.seq = out.size();
    out.push_back(x);
  }
  return out;
}

struct UserItem {
  NodeId user = 0;
  NodeId item = 0;
  auto operator<=>(const UserItem&) const = default;
};

/// Leave-one-out split: each user's most recent distinct item is the test
/// positive; earlier items form the training set.
struct InteractionSplit {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<UserItem> train_pairs;
  std::vector<UserItem> test_pairs;
  /// Sorted train items per user.
  std::vector<std::vector<NodeId>> train_items;
  std::vector<std::optional<NodeId>> test_item;
  std::size_t skipped_users = 0;

  bool is_train(NodeId user, NodeId item) const {
    const auto& v = train_items[user];
    return std::binary_search(v.begin(), v.end(), item);
  }

  /// True when the pair is in the train or the test set.
  bool is_known(NodeId user, NodeId item) const {
    return is_train(user, item) || (test_item[user] && *test_item[user] == item);
  }

  bool operator==(const InteractionSplit&) const = default;
};

/// Repeat interactions with the same item collapse onto their latest
/// occurrence. Users with no interactions are counted in skipped_users.
inline InteractionSplit leave_one_out_split(std::span<const Interaction> interactions, std::size_t num_users,
                                            std::size_t num_items) {
  InteractionSplit split;
  split.num_users = num_users;
  split.num_items = num_items;
  split.train_items.resize(num_users);
  split.test_item.resize(num_users);

  std::vector<std::vector<const Interaction*>> per_user(num_users);
  for (const auto& x : interactions) {
    if (x.user >= num_users || x.item >= num_items) throw RangeError("interaction references an unknown node");
    per_user[x.user].push_back(&x);
  }
  for (std::size_t u = 0; u < num_users; ++u) {
    auto& xs = per_user[u];
    if (xs.empty()) {
      ++split.skipped_users;
      continue;
    }
    std::stable_sort(xs.begin(), xs.end(), [](const Interaction* a, const Interaction* b) {
      const std::int64_t ta = a->timestamp.value_or(0);
      const std::int64_t tb = b->timestamp.value_or(0);
      return ta != tb ? ta < tb : a->seq < b->seq;
    });
    std::vector<NodeId> ordered;
    std::vector<NodeId> seen;
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) {
      const NodeId item = (*it)->item;
      auto pos = std::lower_bound(seen.begin(), seen.end(), item);
      if (pos != seen.end() && *pos == item) continue;
      seen.insert(pos, item);
      ordered.push_back(item);
    }
    std::reverse(ordered.begin(), ordered.end());
    const auto user = static_cast<NodeId>(u);
    const std::size_t n_train = ordered.size() >= 2 ? ordered.size() - 1 : ordered.size();
    for (std::size_t k = 0; k < n_train; ++k) split.train_pairs.push_back({user, ordered[k]});
    if (ordered.size() >= 2) {
      split.test_pairs.push_back({user, ordered.back()});
      split.test_item[u] = ordered.back();
    }
    split.train_items[u].assign(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(split.train_items[u].begin(), split.train_items[u].end());
  }
  return split;
}

struct BprTriple {
  NodeId user = 0;
  NodeId pos_item = 0;
  NodeId neg_item = 0;
  bool operator==(const BprTriple&) const = default;
};

/// Draws an item outside `exclude` (sorted) uniformly at random.
template <class Rng>
NodeId sample_item_outside(std::span<const NodeId> exclude, std::size_t num_items, Rng& rng) {
  if (exclude.size() >= num_items) throw DataError("no item lies outside the excluded set");
  if (exclude.size() * 2 > num_items) {
    // Dense exclusion: index directly into the complement.
    std::uniform_int_distribution<std::size_t> pick(0, num_items - exclude.size() - 1);
    std::size_t k = pick(rng);
    for (std::size_t item = 0, e = 0; item < num_items; ++item) {
      if (e < exclude.size() && exclude[e] == item) {
        ++e;
        continue;
      }
      if (k-- == 0) return static_cast<NodeId>(item);
    }
  }
  std::uniform_int_distribution<std::size_t> dist(0, num_items - 1);
  for (;;) {
    const auto item = static_cast<NodeId>(dist(rng));
    if (!std::binary_search(exclude.begin(), exclude.end(), item)) return item;
  }
}

/// One triple per train pair with a negative drawn uniformly from the items
/// outside the user's train set.
template <class Rng>
std::vector<BprTriple> sample_bpr_triples(const InteractionSplit& split, Rng& rng) {
  std::vector<BprTriple> out;
  out.reserve(split.train_pairs.size());
  for (const auto& p : split.train_pairs) {
    const auto& train = split.train_items[p.user];
    if (train.size() >= split.num_items) {
      throw DataError("user " + std::to_string(p.user) + " has interacted with every item; no negative exists");
    }
    out.push_back({p.user, p.item, sample_item_outside<Rng>(train, split.num_items, rng)});
  }
  return out;
}

inline std::vector<BprTriple> sample_bpr_triples(const InteractionSplit& split, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_bpr_triples(split, rng);
}

}  // namespace hicrec
