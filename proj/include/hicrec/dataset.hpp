#pragma once

#include <span>
#include <string>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/metapath.hpp"

namespace hicrec {

struct AspectDef {
  std::string name;
  std::string user_path;
  std::string item_path;
  bool operator==(const AspectDef&) const = default;
};

/// Everything the trainer and evaluator need: the graph built from train
/// interactions plus attribute relations, the split, and the aspects.
struct Dataset {
  HinGraph graph;
  InteractionSplit split;
  std::vector<Aspect> aspects;

  std::vector<const Aspect*> aspect_ptrs() const {
    std::vector<const Aspect*> out;
    for (const auto& a : aspects) out.push_back(&a);
    return out;
  }

  /// Aspects whose names appear in `names`, in dataset order.
  std::vector<const Aspect*> select_aspects(const std::vector<std::string>& names) const {
    std::vector<const Aspect*> out;
    for (const auto& n : names) {
      bool found = false;
      for (const auto& a : aspects) {
        if (a.name == n) {
          out.push_back(&a);
          found = true;
        }
      }
      if (!found) throw ConfigError("unknown aspect '" + n + "'");
    }
    return out;
  }
};

/// Splits the interactions, inserts the train pairs as the user-item
/// relation, and builds each aspect. `builder` should already hold the
/// attribute relations; a user-item relation in it is rejected because it
/// would leak test pairs into the meta-path graphs.
inline Dataset assemble_dataset(HinBuilder builder, std::span<const Interaction> interactions,
                                const std::vector<AspectDef>& defs, AdjacencyNorm norm = AdjacencyNorm::symmetric) {
  const auto& schema = builder.schema();
  const std::size_t ut = builder.type_index(schema.user_symbol);
  const std::size_t it = builder.type_index(schema.item_symbol);
  if (builder.has_relation(ut, it)) {
    throw SchemaError("user-item edges belong in the interaction file, not the edge list");
  }
  if (interactions.empty()) throw DataError("no interactions");
  for (const auto& x : interactions) {
    builder.observe(ut, x.user);
    builder.observe(it, x.item);
  }
  InteractionSplit split = leave_one_out_split(interactions, builder.count(ut), builder.count(it));
  for (const auto& p : split.train_pairs) builder.add_edge(ut, p.user, it, p.item);
  Dataset ds{builder.build(), std::move(split), {}};
  for (const auto& d : defs) {
    for (const auto& a : ds.aspects) {
      if (a.name == d.name) throw ConfigError("duplicate aspect '" + d.name + "'");
    }
    ds.aspects.push_back(build_aspect(d.name, d.user_path, d.item_path, ds.graph, norm));
  }
  return ds;
}

}  // namespace hicrec
