// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace flowtune {

// Progressive validation stream for one metric: values are recorded before
// the parameter update that learns from them, so the running mean is an
// unbiased estimate of online performance.
class PvSeries {
 public:
  void record(double value) { values_.push_back(value); }

  std::uint64_t count() const { return values_.size(); }
  double mean() const;
  // Mean over the most recent ceil(fraction * count) values.
  double tail_mean(double fraction) const;
  double stddev() const;
  double stderror() const;

  const std::vector<double>& values() const { return values_; }
  void restore(std::vector<double> values) { values_ = std::move(values); }

 private:
  std::vector<double> values_;
};

// All progressive-validation series tracked during training. Sufficiency is
// recorded only for Full-variant flows; pairs and losses are per-episode and
// per-minibatch bookkeeping streams.
struct PvAccumulator {
  PvSeries answer_f1;
  PvSeries support_f1;
  PvSeries sufficiency;
  PvSeries pairs_per_episode;
  PvSeries dpo_loss;  // per minibatch with at least one pair

  static constexpr double kTailFraction = 0.2;
};

}  // namespace flowtune
