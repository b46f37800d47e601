#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"

namespace hicrec {

struct SyntheticConfig {
  std::size_t users = 1000;
  std::size_t items = 500;
  std::size_t groups = 8;
  std::size_t brands = 16;
  std::size_t categories = 10;
  std::size_t min_interactions = 5;
  std::size_t max_interactions = 15;
  /// Probability that an interaction is drawn from the user's taste group
  /// rather than uniformly; 0 gives a null model.
  double alignment = 0.8;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticConfig&) const = default;

  void validate() const {
    if (users == 0 || items == 0 || groups == 0 || brands == 0 || categories == 0) {
      throw ConfigError("synthetic sizes must be >= 1");
    }
    if (min_interactions < 1 || min_interactions > max_interactions) {
      throw ConfigError("synthetic interaction range must satisfy 1 <= min <= max");
    }
    if (max_interactions >= items) throw ConfigError("synthetic.max_interactions must be below synthetic.items");
    if (!(alignment >= 0.0 && alignment <= 1.0)) throw ConfigError("synthetic.alignment must lie in [0, 1]");
  }
};

struct SyntheticData {
  std::vector<std::size_t> user_group;
  std::vector<std::size_t> item_brand;
  std::vector<std::size_t> item_category;
  std::vector<Interaction> interactions;  // timestamps increase in generation order
};

/// Users get a taste group; item brand b belongs to group b % groups. An
/// aligned draw picks an item whose brand is in the user's group.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SyntheticData out;
  std::uniform_int_distribution<std::size_t> group_dist(0, cfg.groups - 1);
  std::uniform_int_distribution<std::size_t> brand_dist(0, cfg.brands - 1);
  std::uniform_int_distribution<std::size_t> cat_dist(0, cfg.categories - 1);
  for (std::size_t u = 0; u < cfg.users; ++u) out.user_group.push_back(group_dist(rng));
  std::vector<std::vector<NodeId>> by_group(cfg.groups);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    out.item_brand.push_back(brand_dist(rng));
    out.item_category.push_back(cat_dist(rng));
    by_group[out.item_brand.back() % cfg.groups].push_back(static_cast<NodeId>(i));
  }

  std::uniform_int_distribution<std::size_t> count_dist(cfg.min_interactions, cfg.max_interactions);
  std::uniform_int_distribution<std::size_t> item_dist(0, cfg.items - 1);
  std::bernoulli_distribution aligned(cfg.alignment);
  std::int64_t clock = 0;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t n = count_dist(rng);
    const auto& pool = by_group[out.user_group[u]];
    std::vector<NodeId> seen;
    while (seen.size() < n) {
      NodeId item;
      if (!pool.empty() && aligned(rng)) {
        item = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      } else {
        item = static_cast<NodeId>(item_dist(rng));
      }
      auto pos = std::lower_bound(seen.begin(), seen.end(), item);
      if (pos != seen.end() && *pos == item) continue;
      seen.insert(pos, item);
      out.interactions.push_back({static_cast<NodeId>(u), item, clock++, out.interactions.size()});
    }
  }
  return out;
}

inline SchemaSpec synthetic_schema() {
  SchemaSpec s;
  s.types = {{"U", 0}, {"I", 0}, {"B", 0}, {"C", 0}};
  s.user_symbol = "U";
  s.item_symbol = "I";
  return s;
}

/// Writes the attribute relations (I-B, I-C) and the timestamped
/// interactions as tab-separated edge lists.
inline void write_synthetic(const SyntheticData& data, const std::filesystem::path& edges,
                            const std::filesystem::path& interactions) {
  for (const auto& p : {edges, interactions}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream e(edges);
  if (!e) throw DataError("cannot write " + edges.string());
  e << "# src_type\tsrc_id\tdst_type\tdst_id\n";
  for (std::size_t i = 0; i < data.item_brand.size(); ++i) e << "I\t" << i << "\tB\t" << data.item_brand[i] << '\n';
  for (std::size_t i = 0; i < data.item_category.size(); ++i) {
    e << "I\t" << i << "\tC\t" << data.item_category[i] << '\n';
  }
  std::ofstream x(interactions);
  if (!x) throw DataError("cannot write " + interactions.string());
  x << "# user\titem\ttimestamp\n";
  for (const auto& r : data.interactions) x << "U\t" << r.user << "\tI\t" << r.item << '\t' << *r.timestamp << '\n';
  if (!e || !x) throw DataError("write failed for synthetic dataset");
}

}  // namespace hicrec
