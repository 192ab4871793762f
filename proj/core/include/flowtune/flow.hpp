// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flowtune/dataset.hpp"
#include "flowtune/types.hpp"

namespace flowtune {

// The flow runs a retrieval loop (QueryGen -> Retrieve -> StopRetrieval,
// between 1 and max_retrievals iterations), then VerboseAnswer ->
// ConciseAnswer, then Sufficiency for the Full variant.
struct FlowSpec {
  FlowVariant variant = FlowVariant::Answerable;
  int max_retrievals = 4;

  std::vector<NodeRole> roles() const;
};

// Per-role actions. Action sets are finite, state-dependent, and canonically
// ordered so that action indices are stable across identical states.
struct QueryAction {
  Token entity;
  Token relation;
  auto operator<=>(const QueryAction&) const = default;
};

struct RetrieveAction {
  DocId doc = -1;
  auto operator<=>(const RetrieveAction&) const = default;
};

struct StopAction {
  bool stop = false;
  auto operator<=>(const StopAction&) const = default;
};

struct VerboseAction {
  DocId doc = -1;
  Token entity;
  auto operator<=>(const VerboseAction&) const = default;
};

struct ConciseAction {
  Token token;
  auto operator<=>(const ConciseAction&) const = default;
};

struct SufficiencyAction {
  bool sufficient = false;
  auto operator<=>(const SufficiencyAction&) const = default;
};

using Action = std::variant<QueryAction, RetrieveAction, StopAction, VerboseAction,
                            ConciseAction, SufficiencyAction>;

struct ActionSet {
  NodeRole role = NodeRole::QueryGen;
  std::vector<Action> actions;

  auto operator<=>(const ActionSet&) const = default;
};

// Mutable episode state. loop_count equals the number of completed Retrieve
// invocations, which equals the length of query_history at loop boundaries.
struct ConversationState {
  std::vector<Token> question;
  std::vector<DocId> scratchpad;  // ordered, no duplicates
  std::vector<QueryAction> query_history;
  std::optional<std::vector<Token>> verbose_answer;
  std::optional<std::vector<Token>> concise_answer;
  std::optional<bool> sufficiency_pred;
  int loop_count = 0;

  auto operator<=>(const ConversationState&) const = default;
};

// The node-specific projection of the state. QueryGen, StopRetrieval,
// VerboseAnswer, and Sufficiency see question + scratchpad docs; Retrieve sees
// the last query + the candidate docs; ConciseAnswer sees question + verbose
// answer. Nothing derived from gold labels ever appears here.
struct Observation {
  NodeRole role = NodeRole::QueryGen;
  std::vector<Token> question;
  std::vector<Doc> scratchpad;
  std::optional<QueryAction> last_query;
  std::vector<Doc> candidates;
  std::vector<Token> verbose;

  auto operator<=>(const Observation&) const = default;
};

struct EpisodeOutcome {
  double answer_f1 = 0.0;
  double support_f1 = 0.0;
  std::optional<bool> sufficiency_correct;
  bool terminal = false;
  // Indexed by ObjectiveKind. A score is meaningful only once its horizon has
  // been reached: support when the retrieval loop exits, answer after
  // ConciseAnswer, sufficiency after the Sufficiency node.
  std::array<bool, kNumObjectives> horizon_reached{};

  bool horizon(ObjectiveKind k) const {
    return horizon_reached[static_cast<std::size_t>(k)];
  }

  bool operator==(const EpisodeOutcome&) const = default;
};

struct Invocation {
  int position = 0;
  NodeRole role = NodeRole::QueryGen;
  Observation observation;
  ActionSet action_set;
  int chosen_index = -1;
  double log_prob_chosen = 0.0;
};

struct Trace {
  std::string instance_id;
  std::vector<Invocation> invocations;
  // pre_states[i] is the state immediately before invocations[i] ran. Stored
  // by value: deviations restore them without replaying the prefix.
  std::vector<ConversationState> pre_states;
  ConversationState final_state;
  EpisodeOutcome outcome;
};

Observation observation_for(NodeRole role, const ConversationState& state,
                            const Instance& inst);

ActionSet action_set_for(NodeRole role, const ConversationState& state,
                         const Instance& inst);

struct PolicySet;

// Runs one full episode from the initial state. Consumes only the instance's
// inputs (question, candidates); gold labels are touched only to score the
// finished outcome. Deterministic for Mode::Greedy; Mode::SeededSample is
// deterministic in (seed, position).
Trace run_episode(const FlowSpec& flow, const PolicySet& policies, const Instance& inst,
                  Mode mode = Mode::Greedy, std::uint64_t seed = 0);

struct ResumeResult {
  EpisodeOutcome outcome;
  int invocations = 0;  // nodes executed by the continuation
  std::array<int, kNumRoles> role_invocations{};
};

// Restores the snapshot at `position`, substitutes the forced action, and
// continues greedily until the stop_objective's score is determined (support:
// retrieval loop exit; answer: after ConciseAnswer; sufficiency: after the
// Sufficiency node). Continuations never launch further continuations; nesting
// throws SequencingError.
ResumeResult resume_from(const FlowSpec& flow, const PolicySet& policies,
                         const Instance& inst, const Trace& trace, int position,
                         int forced_action_index, ObjectiveKind stop_objective);

// One JSON record per invocation:
// {"position":..,"role":..,"action_set_size":..,"chosen_index":..,"log_prob":..}
std::string dump_trace(const Trace& trace);

namespace detail {

// RAII marker for "a rollout continuation is executing on this thread".
// resume_from holds one for its whole run; acquiring a second throws
// SequencingError, which is what keeps rollouts from launching rollouts.
struct RolloutDepthGuard {
  RolloutDepthGuard();
  ~RolloutDepthGuard();
  RolloutDepthGuard(const RolloutDepthGuard&) = delete;
  RolloutDepthGuard& operator=(const RolloutDepthGuard&) = delete;
};

int rollout_depth();

}  // namespace detail

// Dataset-against-flow validation: every instance must offer at least
// max_retrievals candidates so the Retrieve action set can never be empty.
void validate_for_flow(const std::vector<Instance>& instances, const FlowSpec& flow);

}  // namespace flowtune
