#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/model.hpp"

namespace hicrec {

struct EvalProtocol {
  std::size_t negatives = 99;
  std::vector<std::size_t> top_n{5, 10, 15, 20};
  std::uint64_t seed = 0;
  std::size_t cold_start_threshold = 5;

  bool operator==(const EvalProtocol&) const = default;
};

/// items[0] is the held-out positive, followed by the sampled negatives.
struct CandidateSet {
  NodeId user = 0;
  std::vector<NodeId> items;
  bool shortfall = false;
};

/// Draws `protocol.negatives` distinct items outside `exclude` (sorted,
/// must contain the positive). The stream depends only on (seed, user).
inline CandidateSet sample_candidates(NodeId user, NodeId positive, std::span<const NodeId> exclude,
                                      std::size_t num_items, const EvalProtocol& protocol) {
  CandidateSet out;
  out.user = user;
  out.items.push_back(positive);
  const std::size_t eligible = num_items - std::min(num_items, exclude.size());
  std::mt19937_64 rng(detail::splitmix64(protocol.seed ^ detail::splitmix64(static_cast<std::uint64_t>(user) + 1)));
  const auto excluded = [&](NodeId item) { return std::binary_search(exclude.begin(), exclude.end(), item); };

  if (eligible <= 2 * protocol.negatives) {
    std::vector<NodeId> pool;
    pool.reserve(eligible);
    for (std::size_t i = 0; i < num_items; ++i) {
      if (!excluded(static_cast<NodeId>(i))) pool.push_back(static_cast<NodeId>(i));
    }
    const std::size_t take = std::min(pool.size(), protocol.negatives);
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      out.items.push_back(pool[k]);
    }
    out.shortfall = take < protocol.negatives;
    return out;
  }
  std::vector<NodeId> chosen;
  std::uniform_int_distribution<std::size_t> dist(0, num_items - 1);
  while (chosen.size() < protocol.negatives) {
    const auto item = static_cast<NodeId>(dist(rng));
    if (excluded(item)) continue;
    auto pos = std::lower_bound(chosen.begin(), chosen.end(), item);
    if (pos != chosen.end() && *pos == item) continue;
    chosen.insert(pos, item);
    out.items.push_back(item);
  }
  return out;
}

/// Candidates for a user with a test pair; negatives avoid every train and
/// test item of that user.
inline CandidateSet sample_candidates(NodeId user, const InteractionSplit& split, const EvalProtocol& protocol) {
  if (user >= split.num_users || !split.test_item[user]) {
    throw ContractViolation("sample_candidates: user " + std::to_string(user) + " has no test item");
  }
  const NodeId positive = *split.test_item[user];
  std::vector<NodeId> exclude = split.train_items[user];
  exclude.insert(std::lower_bound(exclude.begin(), exclude.end(), positive), positive);
  return sample_candidates(user, positive, exclude, split.num_items, protocol);
}

/// 1-based rank of candidate `positive` under descending score, ties broken
/// by ascending item id.
inline std::size_t rank_of(std::span<const double> scores, std::span<const NodeId> items, std::size_t positive = 0) {
  if (scores.size() != items.size() || positive >= scores.size()) throw ShapeError("rank_of: size mismatch");
  const double sp = scores[positive];
  const NodeId ip = items[positive];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == positive) continue;
    if (scores[j] > sp || (scores[j] == sp && items[j] < ip)) ++rank;
  }
  return rank;
}

inline double hit_ratio(std::span<const std::size_t> ranks, std::size_t n) {
  if (ranks.empty()) throw ContractViolation("hit_ratio: no users");
  std::size_t hits = 0;
  for (std::size_t p : ranks) hits += p <= n ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

inline double ndcg(std::span<const std::size_t> ranks, std::size_t n) {
  if (ranks.empty()) throw ContractViolation("ndcg: no users");
  double sum = 0.0;
  for (std::size_t p : ranks) {
    if (p <= n) sum += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  }
  return sum / static_cast<double>(ranks.size());
}

struct BucketMetrics {
  std::string name;
  std::size_t users = 0;
  std::vector<double> hr;  // one per protocol.top_n entry
  std::vector<double> ndcg;
};

struct RankingReport {
  std::vector<std::size_t> top_n;
  std::vector<BucketMetrics> buckets;  // "all", then "cold"
  std::size_t shortfall_users = 0;
  /// Per evaluated user in id order: (user, rank of the positive).
  std::vector<std::pair<NodeId, std::size_t>> ranks;

  const BucketMetrics& bucket(const std::string& name) const {
    for (const auto& b : buckets) {
      if (b.name == name) return b;
    }
    throw ContractViolation("no bucket '" + name + "'");
  }

  double hr_at(std::size_t n, const std::string& bucket_name = "all") const {
    const auto& b = bucket(bucket_name);
    for (std::size_t k = 0; k < top_n.size(); ++k) {
      if (top_n[k] == n) return b.hr[k];
    }
    throw ContractViolation("N=" + std::to_string(n) + " not in report");
  }

  double ndcg_at(std::size_t n, const std::string& bucket_name = "all") const {
    const auto& b = bucket(bucket_name);
    for (std::size_t k = 0; k < top_n.size(); ++k) {
      if (top_n[k] == n) return b.ndcg[k];
    }
    throw ContractViolation("N=" + std::to_string(n) + " not in report");
  }
};

inline std::string format_metric(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline void write_report_csv(const RankingReport& r, std::ostream& out) {
  out << "bucket,N,HR,NDCG,users\n";
  for (const auto& b : r.buckets) {
    for (std::size_t k = 0; k < r.top_n.size(); ++k) {
      out << b.name << ',' << r.top_n[k] << ',' << format_metric(b.hr[k]) << ',' << format_metric(b.ndcg[k]) << ','
          << b.users << '\n';
    }
  }
}

inline void print_report_table(const RankingReport& r, std::ostream& out) {
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %4s %10s %10s %8s\n", "bucket", "N", "HR", "NDCG", "users");
  out << line;
  for (const auto& b : r.buckets) {
    for (std::size_t k = 0; k < r.top_n.size(); ++k) {
      std::snprintf(line, sizeof line, "%-8s %4zu %10.4f %10.4f %8zu\n", b.name.c_str(), r.top_n[k], b.hr[k],
                    b.ndcg[k], b.users);
      out << line;
    }
  }
  if (r.shortfall_users != 0) out << "warning: " << r.shortfall_users << " users had fewer negatives than requested\n";
}

/// Worker count from HICREC_THREADS, default 1.
inline std::size_t eval_threads() {
  const char* env = std::getenv("HICREC_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("HICREC_THREADS must be a positive integer");
  return static_cast<std::size_t>(n);
}

/// Ranks every user's held-out item among its candidates. `score(u, i)` must
/// be safe to call concurrently when threads > 1.
template <class Scorer>
RankingReport evaluate(const Scorer& score, const InteractionSplit& split, const EvalProtocol& protocol,
                       std::size_t threads = eval_threads()) {
  std::vector<NodeId> users;
  for (std::size_t u = 0; u < split.num_users; ++u) {
    if (split.test_item[u]) users.push_back(static_cast<NodeId>(u));
  }
  if (users.empty()) throw DataError("evaluation split has no test users");
  std::vector<std::size_t> ranks(users.size());
  std::vector<char> shortfall(users.size(), 0);
  const auto work = [&](std::size_t begin, std::size_t step) {
    std::vector<double> scores;
    for (std::size_t k = begin; k < users.size(); k += step) {
      const CandidateSet c = sample_candidates(users[k], split, protocol);
      scores.resize(c.items.size());
      for (std::size_t j = 0; j < c.items.size(); ++j) scores[j] = score(users[k], c.items[j]);
      ranks[k] = rank_of(scores, c.items, 0);
      shortfall[k] = c.shortfall ? 1 : 0;
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, users.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  RankingReport report;
  report.top_n = protocol.top_n;
  std::vector<std::size_t> cold;
  for (std::size_t k = 0; k < users.size(); ++k) {
    report.ranks.emplace_back(users[k], ranks[k]);
    report.shortfall_users += static_cast<std::size_t>(shortfall[k]);
    if (split.train_items[users[k]].size() <= protocol.cold_start_threshold) cold.push_back(ranks[k]);
  }
  const auto fill = [&](std::string name, const std::vector<std::size_t>& rs) {
    BucketMetrics b;
    b.name = std::move(name);
    b.users = rs.size();
    for (std::size_t n : protocol.top_n) {
      b.hr.push_back(rs.empty() ? 0.0 : hit_ratio(rs, n));
      b.ndcg.push_back(rs.empty() ? 0.0 : ndcg(rs, n));
    }
    report.buckets.push_back(std::move(b));
  };
  fill("all", ranks);
  fill("cold", cold);
  return report;
}

/// Embeddings are computed once and shared by every user.
inline RankingReport evaluate_model(const HicRecModel& model, const ParamStore& params, const InteractionSplit& split,
                                    const EvalProtocol& protocol, std::size_t threads = eval_threads()) {
  const ForwardState state = model.forward(params);
  const auto score = [&](NodeId u, NodeId i) { return model.score(u, i, state, params); };
  return evaluate(score, split, protocol, threads);
}

}  // namespace hicrec
