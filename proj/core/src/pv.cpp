// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/pv.hpp"

#include <cmath>

#include "flowtune/types.hpp"

namespace flowtune {

double PvSeries::mean() const {
  if (values_.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

double PvSeries::tail_mean(double fraction) const {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ConfigError("tail_mean: fraction must be in (0, 1]");
  }
  if (values_.empty()) return 0.0;
  const auto n = values_.size();
  const auto take = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  double sum = 0.0;
  for (std::size_t i = n - take; i < n; ++i) sum += values_[i];
  return sum / static_cast<double>(take);
}

double PvSeries::stddev() const {
  const auto n = values_.size();
  if (n < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : values_) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double PvSeries::stderror() const {
  const auto n = values_.size();
  if (n < 2) return 0.0;
  return stddev() / std::sqrt(static_cast<double>(n));
}

}  // namespace flowtune
