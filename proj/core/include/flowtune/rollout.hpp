// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowtune/flow.hpp"
#include "flowtune/policy.hpp"

namespace flowtune {

// Objective assignment: retrieval-loop roles are scored on support F1, answer
// roles on answer F1, and the sufficiency role on sufficiency correctness.
// This split is what lets continuations terminate early.
ObjectiveKind objective_of(NodeRole role);

// The outcome's score for one objective. Throws SequencingError when the
// objective's horizon was not reached by the (possibly partial) episode.
double score_for(const EpisodeOutcome& outcome, ObjectiveKind kind);

// A per-node-output preference induced from a one-step deviation: the winner
// continuation scored strictly higher than the loser on the node's objective.
struct PreferencePair {
  NodeRole role = NodeRole::QueryGen;
  int position = 0;
  Observation observation;
  ActionSet action_set;
  int winner_index = -1;
  int loser_index = -1;
  double margin = 0.0;  // |score difference|, > 0
};

// Supervised signal for the terminal ConciseAnswer node: the index of the
// gold answer token in the action set. Extracted once per finished episode.
struct SupervisedExample {
  Observation observation;
  ActionSet action_set;
  int gold_index = -1;
};

struct RolloutStats {
  std::string episode_id;
  std::int64_t rollouts_launched = 0;
  std::int64_t rollout_node_invocations = 0;
  std::int64_t pairs_emitted = 0;
  int trace_len = 0;
};

// Orders a (realized, alternative) score pair. Returns nothing on ties; ties
// carry no training signal. Symmetric: swapping the roles of the two
// continuations flips winner and loser but preserves the unordered pair.
struct OrderedPreference {
  int winner_index;
  int loser_index;
  double margin;
};
std::optional<OrderedPreference> preference_from_scores(double realized_score,
                                                        int realized_index,
                                                        double alternative_score,
                                                        int alternative_index);

// One-step deviations over a finished trace: at every position except
// ConciseAnswer invocations, resume each of the top-k alternative actions and
// compare the continuation's objective score with the realized one. Appends
// emitted pairs and the episode's supervised example (when the gold token is
// present in the ConciseAnswer action set) to the output vectors.
RolloutStats generate_preferences(const FlowSpec& flow, const PolicySet& policies,
                                  const Instance& inst, const Trace& trace, int k,
                                  std::vector<PreferencePair>& pairs,
                                  std::vector<SupervisedExample>& supervised);

// Gold token index for the trace's ConciseAnswer invocation: the action with
// the highest answer F1 against the instance's gold answers, lowest index on
// ties; nothing when no action scores above zero.
std::optional<SupervisedExample> supervised_example_for(const Instance& inst,
                                                        const Trace& trace);

}  // namespace flowtune
