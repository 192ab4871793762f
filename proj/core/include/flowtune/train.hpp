// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowtune/checkpoint.hpp"
#include "flowtune/dataset.hpp"
#include "flowtune/flow.hpp"
#include "flowtune/optim.hpp"
#include "flowtune/pv.hpp"
#include "flowtune/rollout.hpp"

namespace flowtune {

struct TrainConfig {
  FlowSpec flow;
  int rollouts_k = 1;
  int minibatch = 8;
  DpoConfig dpo;
  std::uint64_t seed = 0;
  int passes = 1;
  std::int64_t max_episodes = -1;  // -1: no bound
  bool no_prior = false;           // start from all-zero weights
  bool disable_updates = false;    // stream and record PV only
  bool enforce_grounded = false;   // applied when recording PV answer F1
  bool pairwise_inference = false; // evaluation-time treatment, ignored here

  std::string canonical_text() const;  // key=value lines, hashed into checkpoints
};

// Instrumentation points, in call order per minibatch: every episode's PV
// metrics are recorded before the minibatch's parameter update runs.
struct TrainHooks {
  std::function<void(std::uint64_t episodes_seen)> on_pv_record;
  std::function<void(std::uint64_t episodes_seen)> on_update;
  std::function<bool()> should_stop;  // polled between minibatches
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<std::string> metrics_lines;  // one JSON record per minibatch
  std::vector<std::string> rollout_lines;  // one JSON record per episode
  bool interrupted = false;
};

// Online loop: run each minibatch's episodes greedily, record progressive
// validation, generate one-step-deviation preferences, apply one update per
// role, and periodically attempt a soft reference update gated on PV answer
// F1 improvement. Resumes from `start` when provided.
TrainResult train(const std::vector<Instance>& instances, const TrainConfig& config,
                  const std::optional<Checkpoint>& start = std::nullopt,
                  const TrainHooks& hooks = {});

struct EvalFlags {
  bool enforce_grounded = false;
  bool pairwise = false;
};

struct PairDecision {
  std::string pair_id;
  std::string id_a, id_b;
  double score_a = 0.0, score_b = 0.0;
  bool pred_a = false, pred_b = false;
};

struct EvalReport {
  std::int64_t episodes = 0;
  double answer_f1_mean = 0.0;
  double support_f1_mean = 0.0;
  std::optional<double> sufficiency_accuracy;
  std::int64_t off_document = 0;  // concise answers not grounded in any one doc
  std::vector<double> answer_values;   // per episode, in dataset order
  std::vector<double> support_values;
  std::vector<PairDecision> pairs;     // filled under flags.pairwise

  std::string to_json() const;
};

// Frozen-policy evaluation. enforce_grounded projects each concise answer
// onto the retrieved docs before scoring answer F1 (support and sufficiency
// are untouched); pairwise replaces thresholded sufficiency predictions with
// the paired decision and requires a complete two-member pair per pair_id.
EvalReport evaluate(const std::vector<Instance>& instances, const FlowSpec& flow,
                    const PolicySet& policies, const EvalFlags& flags = {},
                    const std::function<void(const Trace&)>& per_trace = nullptr);

}  // namespace flowtune
