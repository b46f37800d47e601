#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/eval.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/model.hpp"
#include "hicrec/params.hpp"

namespace hicrec {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 4096;
  double lr = 0.001;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  /// Evaluations without improvement before stopping; 0 disables.
  std::size_t patience = 0;
  /// Users whose latest train item is held out for validation; 0 disables.
  std::size_t validation_users = 0;
  /// Write ckpt-epoch-<n>.bin every this many epochs; 0 disables.
  std::size_t checkpoint_every = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a finite value >= 0");
    if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
    if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> hr10;
  std::optional<double> ndcg10;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::vector<double> losses() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.loss);
    return out;
  }
};

inline void write_train_log_csv(const TrainLog& log, std::ostream& out) {
  out << "epoch,loss,hr10,ndcg10,seconds\n";
  char buf[64];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%.10g", e.loss);
    out << e.epoch << ',' << buf << ',';
    if (e.hr10) out << format_metric(*e.hr10);
    out << ',';
    if (e.ndcg10) out << format_metric(*e.ndcg10);
    std::snprintf(buf, sizeof buf, "%.3f", e.seconds);
    out << ',' << buf << '\n';
  }
}

/// Mutable state carried across epochs.
struct TrainerState {
  std::uint64_t adam_step = 0;
};

/// Negatives are redrawn, the triples shuffled with seed ^ epoch, then one
/// Adam step per mini-batch. Returns the triple-weighted mean batch loss.
inline double train_epoch(const HicRecModel& model, ParamStore& params, const InteractionSplit& split,
                          const TrainConfig& cfg, std::size_t epoch, TrainerState& state) {
  const std::uint64_t stream = cfg.seed ^ static_cast<std::uint64_t>(epoch);
  std::vector<BprTriple> triples = sample_bpr_triples(split, detail::splitmix64(stream + 0x5851F42D4C957F2Dull));
  if (triples.empty()) throw DataError("no training pairs");
  std::mt19937_64 shuffle_rng(stream);
  std::shuffle(triples.begin(), triples.end(), shuffle_rng);

  const AdamConfig adam{cfg.lr};
  double sum = 0.0;
  for (std::size_t begin = 0, batch = 0; begin < triples.size(); begin += cfg.batch_size, ++batch) {
    const std::size_t end = std::min(triples.size(), begin + cfg.batch_size);
    const std::span<const BprTriple> slice(triples.data() + begin, end - begin);
    params.zero_grad();
    const ForwardState fwd = model.forward(params);
    const double loss = model.backward(slice, fwd, params, cfg.lambda);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite loss " << loss << " at epoch " << epoch << ", batch " << batch << " (" << slice.size()
          << " triples); first triples:";
      for (std::size_t k = 0; k < std::min<std::size_t>(slice.size(), 8); ++k) {
        msg << " (" << slice[k].user << ',' << slice[k].pos_item << ',' << slice[k].neg_item << ')';
      }
      for (const auto& p : params) {
        if (!all_finite(p.value)) msg << "; non-finite values in " << p.name;
      }
      throw NumericError(msg.str());
    }
    adam_step(params, adam, ++state.adam_step);
    sum += loss * static_cast<double>(slice.size());
  }
  return sum / static_cast<double>(triples.size());
}

/// Train split with the validation items removed, and a split whose test
/// items are those validation items.
struct ValidationSplit {
  InteractionSplit train;
  InteractionSplit validation;
};

/// Holds out the latest train item of up to `users` users that keep at least
/// two train items afterwards.
inline ValidationSplit carve_validation(const InteractionSplit& split, std::size_t users, std::uint64_t seed) {
  std::vector<std::optional<NodeId>> last(split.num_users);
  for (const auto& p : split.train_pairs) last[p.user] = p.item;
  std::vector<NodeId> eligible;
  for (std::size_t u = 0; u < split.num_users; ++u) {
    if (split.train_items[u].size() >= 3) eligible.push_back(static_cast<NodeId>(u));
  }
  std::mt19937_64 rng(detail::splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ull));
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min(eligible.size(), users));
  std::sort(eligible.begin(), eligible.end());

  ValidationSplit out;
  out.train = split;
  out.train.train_pairs.clear();
  out.train.test_pairs.clear();
  std::fill(out.train.test_item.begin(), out.train.test_item.end(), std::nullopt);
  std::vector<char> held(split.num_users, 0);
  for (NodeId u : eligible) held[u] = 1;
  for (const auto& p : split.train_pairs) {
    if (held[p.user] && *last[p.user] == p.item) continue;
    out.train.train_pairs.push_back(p);
  }
  for (NodeId u : eligible) {
    auto& items = out.train.train_items[u];
    items.erase(std::lower_bound(items.begin(), items.end(), *last[u]));
  }
  out.validation = out.train;
  for (NodeId u : eligible) {
    out.validation.test_pairs.push_back({u, *last[u]});
    out.validation.test_item[u] = *last[u];
  }
  out.train.test_item = split.test_item;
  out.train.test_pairs = split.test_pairs;
  return out;
}

struct FitResult {
  ParamStore params;  // best by validation HR@10, else the final parameters
  ParamStore last;
  TrainLog log;
  std::size_t best_epoch = 0;
  std::optional<double> best_hr10;
  bool stopped_early = false;
};

struct FitOptions {
  EvalProtocol protocol;
  /// Directory for ckpt-epoch-<n>.bin and ckpt-best.bin; empty disables.
  std::filesystem::path checkpoint_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

inline FitResult fit(const HicRecModel& model, const InteractionSplit& split, const TrainConfig& cfg,
                     const FitOptions& opt = {}) {
  cfg.validate();
  std::optional<ValidationSplit> val;
  if (cfg.validation_users > 0) {
    val = carve_validation(split, cfg.validation_users, cfg.seed);
    if (val->validation.test_pairs.empty()) val.reset();
  }
  const InteractionSplit& train = val ? val->train : split;

  EvalProtocol val_protocol = opt.protocol;
  val_protocol.top_n = {10};

  FitResult result;
  ParamStore params = model.init_params(cfg.seed);
  TrainerState state;
  std::size_t stale = 0;
  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = train_epoch(model, params, train, cfg, epoch, state);
    bool improved = false;
    if (val && epoch % cfg.eval_every == 0) {
      const RankingReport r = evaluate_model(model, params, val->validation, val_protocol);
      rec.hr10 = r.hr_at(10);
      rec.ndcg10 = r.ndcg_at(10);
      if (!result.best_hr10 || *rec.hr10 > *result.best_hr10) {
        result.best_hr10 = rec.hr10;
        result.best_epoch = epoch;
        result.params = params;
        improved = true;
        stale = 0;
      } else {
        ++stale;
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(rec);
    if (!opt.checkpoint_dir.empty()) {
      if (cfg.checkpoint_every != 0 && epoch % cfg.checkpoint_every == 0) {
        save_checkpoint(params, opt.checkpoint_dir / ("ckpt-epoch-" + std::to_string(epoch) + ".bin"));
      }
      if (improved) save_checkpoint(params, opt.checkpoint_dir / "ckpt-best.bin");
    }
    if (val && cfg.patience != 0 && stale >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.last = params;
  if (!result.best_hr10) {
    result.params = params;
    result.best_epoch = result.log.epochs.empty() ? 0 : result.log.epochs.back().epoch;
    if (!opt.checkpoint_dir.empty()) save_checkpoint(params, opt.checkpoint_dir / "ckpt-best.bin");
  }
  return result;
}

}  // namespace hicrec
