// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowtune {

// Summary of one training run, digested from its metrics and rollout logs.
struct RunReport {
  std::uint64_t episodes_seen = 0;
  double pv_answer_f1 = 0.0;
  double pv_support_f1 = 0.0;
  std::optional<double> pv_suff_acc;
  std::int64_t total_pairs = 0;
  std::int64_t ref_updates = 0;
  std::int64_t rollouts_launched = 0;
  std::int64_t rollout_invocations = 0;
  // Fraction of the first min(100, n) episodes that emitted no preference
  // pair. Present only when rollout lines were supplied.
  std::optional<double> zero_pair_fraction_first_100;
};

RunReport summarize_run(const std::vector<std::string>& metrics_lines,
                        const std::vector<std::string>& rollout_lines);

// Human-readable key=value rendering, one field per line.
std::string render_report(const RunReport& report);

// The metrics log as CSV, one row per minibatch line; missing sufficiency
// renders as an empty cell.
std::string render_csv(const std::vector<std::string>& metrics_lines);

}  // namespace flowtune
