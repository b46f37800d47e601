#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/eval.hpp"
#include "hicrec/metapath.hpp"
#include "hicrec/model.hpp"
#include "hicrec/training.hpp"

namespace hicrec {

enum class SweepKind { aspects, dimension };

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "aspects") return SweepKind::aspects;
  if (s == "dimension") return SweepKind::dimension;
  throw ConfigError("sweep kind must be \"aspects\" or \"dimension\", got \"" + s + "\"");
}

inline std::string to_string(SweepKind k) { return k == SweepKind::aspects ? "aspects" : "dimension"; }

struct SweepPoint {
  std::string label;
  ModelConfig model;
  std::vector<const Aspect*> aspects;
};

struct SweepRow {
  std::string label;
  std::size_t parameter_count = 0;
  RankingReport report;
};

/// Every aspect subset that contains `base`, ordered by subset bitmask.
inline std::vector<SweepPoint> aspect_grid(const std::vector<const Aspect*>& all, const std::string& base,
                                           const ModelConfig& model) {
  std::vector<const Aspect*> others;
  const Aspect* base_aspect = nullptr;
  for (const Aspect* a : all) {
    if (a->name == base) {
      base_aspect = a;
    } else {
      others.push_back(a);
    }
  }
  if (!base_aspect) throw ConfigError("sweep.base_aspect: no aspect named '" + base + "'");
  if (others.size() > 16) throw ConfigError("aspect sweep over more than 17 aspects is not supported");
  std::vector<SweepPoint> grid;
  for (std::size_t mask = 0; mask < (std::size_t{1} << others.size()); ++mask) {
    SweepPoint p;
    p.model = model;
    p.label = base;
    // Keep dataset order so the same subset always lays out identically.
    for (const Aspect* a : all) {
      bool pick = a == base_aspect;
      for (std::size_t k = 0; k < others.size(); ++k) pick = pick || ((mask >> k & 1) != 0 && others[k] == a);
      if (pick) p.aspects.push_back(a);
    }
    for (std::size_t k = 0; k < others.size(); ++k) {
      if ((mask >> k & 1) != 0) p.label += "+" + others[k]->name;
    }
    grid.push_back(std::move(p));
  }
  return grid;
}

/// d = K = each grid value, all aspects.
inline std::vector<SweepPoint> dimension_grid(const std::vector<const Aspect*>& all,
                                              const std::vector<std::size_t>& dims, const ModelConfig& model) {
  if (dims.empty()) throw ConfigError("sweep.dimensions must not be empty");
  std::vector<SweepPoint> grid;
  for (std::size_t d : dims) {
    SweepPoint p;
    p.model = model;
    p.model.dim = d;
    p.model.factors = d;
    p.label = "d=" + std::to_string(d);
    p.aspects = all;
    grid.push_back(std::move(p));
  }
  return grid;
}

/// Retrains from the same seed at each grid point and evaluates the best
/// parameters on the test split.
inline std::vector<SweepRow> run_sweep(const std::vector<SweepPoint>& grid, const InteractionSplit& split,
                                       const TrainConfig& train, const EvalProtocol& protocol,
                                       std::ostream* progress = nullptr) {
  std::vector<SweepRow> rows;
  for (const auto& p : grid) {
    const HicRecModel model(p.model, p.model.kind == ModelKind::mf_bpr ? std::vector<const Aspect*>{} : p.aspects,
                            split.num_users, split.num_items);
    FitOptions opt;
    opt.protocol = protocol;
    const FitResult fr = fit(model, split, train, opt);
    SweepRow row;
    row.label = p.label;
    row.parameter_count = fr.params.parameter_count();
    row.report = evaluate_model(model, fr.params, split, protocol);
    if (progress) {
      *progress << p.label << ": HR@" << protocol.top_n.front() << ' '
                << format_metric(row.report.bucket("all").hr.front()) << '\n';
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// One row per grid point, overall bucket.
inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  if (rows.empty()) return;
  const auto& top_n = rows.front().report.top_n;
  out << "point,parameters";
  for (std::size_t n : top_n) out << ",HR@" << n << ",NDCG@" << n;
  out << ",users\n";
  for (const auto& r : rows) {
    const auto& b = r.report.bucket("all");
    out << r.label << ',' << r.parameter_count;
    for (std::size_t k = 0; k < top_n.size(); ++k) out << ',' << format_metric(b.hr[k]) << ',' << format_metric(b.ndcg[k]);
    out << ',' << b.users << '\n';
  }
}

}  // namespace hicrec
