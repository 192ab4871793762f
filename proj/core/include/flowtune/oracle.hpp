// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "flowtune/dataset.hpp"
#include "flowtune/flow.hpp"

namespace flowtune {

struct OracleResult {
  double best_answer_f1 = 0.0;
  double best_support_f1 = 0.0;
};

// Exact per-metric maxima over every action sequence the flow can realize,
// maximized independently. Enumerates all reachable retrieved sets of size
// 1..max_retrievals (the metrics are functions of the retrieved set, the
// verbose (doc, entity) choice, and the concise token, so retrieval order
// collapses) and, per set, every answer-stage choice. Throws ConfigError
// once more than `limit` combinations have been visited.
OracleResult oracle_best(const Instance& inst, const FlowSpec& flow,
                         std::int64_t limit = 10'000'000);

}  // namespace flowtune
