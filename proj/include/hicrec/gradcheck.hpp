#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hicrec/params.hpp"

namespace hicrec {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// Above this many elements a seeded random subset is checked.
  std::size_t max_elements = 10000;
  std::uint64_t seed = 0;
  /// Optional fingerprint of every ReLU's on/off state. When given, an
  /// element is excluded exactly when a ±h step changes the fingerprint;
  /// otherwise a slope-gap heuristic is used.
  std::function<std::vector<std::uint8_t>(const ParamStore&)> kink_probe;
};

struct GradCheckReport {
  std::size_t checked = 0;
  /// Elements skipped because the loss is not differentiable within ±h
  /// (a ReLU pre-activation sitting on its kink).
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

/// Compares the analytic gradients already stored in `store` against central
/// differences of `loss`. Relative error uses max(|a|, |b|, r/tol) as the
/// denominator, where r is the roundoff resolution of the difference
/// quotient. Elements sitting on a ReLU kink are excluded.
inline GradCheckReport finite_difference_check(const std::function<double(const ParamStore&)>& loss,
                                               ParamStore& store, const GradCheckOptions& opt = {}) {
  struct Ref {
    std::size_t tensor;
    std::size_t index;
  };
  std::vector<ParamTensor*> tensors;
  std::vector<Ref> refs;
  for (auto& p : store) {
    for (std::size_t i = 0; i < p.value.size(); ++i) refs.push_back({tensors.size(), i});
    tensors.push_back(&p);
  }
  if (refs.size() > opt.max_elements) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(refs.begin(), refs.end(), rng);
    refs.resize(opt.max_elements);
  }

  GradCheckReport report;
  const double base = loss(store);
  // Smallest slope a central difference can resolve: some ulps of the loss
  // spread over 2h. Below it the comparison becomes absolute.
  const double resolution = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(base) / (2.0 * opt.h);
  std::vector<std::uint8_t> base_pattern;
  if (opt.kink_probe) base_pattern = opt.kink_probe(store);
  for (const Ref& r : refs) {
    ParamTensor& p = *tensors[r.tensor];
    double& x = p.value.values()[r.index];
    const double saved = x;
    x = saved + opt.h;
    const double up = loss(store);
    const bool flip_up = opt.kink_probe && opt.kink_probe(store) != base_pattern;
    x = saved - opt.h;
    const double down = loss(store);
    const bool flip_down = opt.kink_probe && opt.kink_probe(store) != base_pattern;
    x = saved;

    if (opt.kink_probe) {
      if (flip_up || flip_down) {
        ++report.excluded;
        continue;
      }
    } else {
      // Smooth functions have a one-sided slope gap that shrinks linearly with h;
      // a kink keeps the gap when h is halved.
      const double gap = (up - base) / opt.h - (base - down) / opt.h;
      const double kink_scale = std::max({std::abs((up - base) / opt.h), std::abs((base - down) / opt.h), 1e-8});
      if (std::abs(gap) / kink_scale > opt.tol) {
        const double half = opt.h / 2.0;
        x = saved + half;
        const double up_half = loss(store);
        x = saved - half;
        const double down_half = loss(store);
        x = saved;
        const double gap_half = (up_half - base) / half - (base - down_half) / half;
        if (std::abs(gap_half) > 0.75 * std::abs(gap)) {
          ++report.excluded;
          continue;
        }
      }
    }
    const double numeric = (up - down) / (2.0 * opt.h);
    const double analytic = p.grad.values()[r.index];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), resolution / opt.tol, 1e-8});
    const double rel = std::abs(numeric - analytic) / denom;
    ++report.checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = p.name;
      report.worst_index = r.index;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error < opt.tol;
  return report;
}

}  // namespace hicrec
