// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/rollout.hpp"

#include <cmath>

#include "flowtune/metrics.hpp"

namespace flowtune {

ObjectiveKind objective_of(NodeRole role) {
  switch (role) {
    case NodeRole::QueryGen:
    case NodeRole::Retrieve:
    case NodeRole::StopRetrieval:
      return ObjectiveKind::Support;
    case NodeRole::VerboseAnswer:
    case NodeRole::ConciseAnswer:
      return ObjectiveKind::Answer;
    case NodeRole::Sufficiency:
      return ObjectiveKind::Sufficiency;
  }
  throw ConfigError("unknown role");
}

double score_for(const EpisodeOutcome& outcome, ObjectiveKind kind) {
  if (!outcome.horizon(kind)) {
    throw SequencingError(std::string("score_for: ") + objective_name(kind) +
                          " horizon not reached");
  }
  switch (kind) {
    case ObjectiveKind::Support: return outcome.support_f1;
    case ObjectiveKind::Answer: return outcome.answer_f1;
    case ObjectiveKind::Sufficiency: return *outcome.sufficiency_correct ? 1.0 : 0.0;
  }
  throw ConfigError("unknown objective");
}

std::optional<OrderedPreference> preference_from_scores(double realized_score,
                                                        int realized_index,
                                                        double alternative_score,
                                                        int alternative_index) {
  if (realized_score == alternative_score) return std::nullopt;
  if (alternative_score > realized_score) {
    return OrderedPreference{alternative_index, realized_index,
                             alternative_score - realized_score};
  }
  return OrderedPreference{realized_index, alternative_index,
                           realized_score - alternative_score};
}

std::optional<SupervisedExample> supervised_example_for(const Instance& inst,
                                                        const Trace& trace) {
  for (const Invocation& inv : trace.invocations) {
    if (inv.role != NodeRole::ConciseAnswer) continue;
    int best_index = -1;
    double best_f1 = 0.0;
    for (int i = 0; i < static_cast<int>(inv.action_set.actions.size()); ++i) {
      const auto& ca = std::get<ConciseAction>(inv.action_set.actions[static_cast<std::size_t>(i)]);
      const double f1 = answer_f1({ca.token}, inst.gold_answers);
      if (f1 > best_f1) {
        best_f1 = f1;
        best_index = i;
      }
    }
    if (best_index < 0) return std::nullopt;  // gold absent: skip, not fatal
    return SupervisedExample{inv.observation, inv.action_set, best_index};
  }
  return std::nullopt;
}

RolloutStats generate_preferences(const FlowSpec& flow, const PolicySet& policies,
                                  const Instance& inst, const Trace& trace, int k,
                                  std::vector<PreferencePair>& pairs,
                                  std::vector<SupervisedExample>& supervised) {
  if (k < 1) throw ConfigError("generate_preferences: k must be >= 1");
  if (!trace.outcome.terminal) {
    throw SequencingError("generate_preferences needs a finished episode");
  }
  static const FeatureMap fmap;

  RolloutStats stats;
  stats.episode_id = trace.instance_id;
  stats.trace_len = static_cast<int>(trace.invocations.size());

  for (const Invocation& inv : trace.invocations) {
    // The terminal node is trained supervised; deviating it would only
    // re-measure the answer metric directly.
    if (inv.role == NodeRole::ConciseAnswer) continue;
    const ObjectiveKind objective = objective_of(inv.role);
    const double realized = score_for(trace.outcome, objective);

    const std::vector<int> alts = alternatives(policies.at(inv.role), fmap, inv.observation,
                                               inv.action_set, inv.chosen_index, k);
    for (int alt : alts) {
      ResumeResult rr =
          resume_from(flow, policies, inst, trace, inv.position, alt, objective);
      ++stats.rollouts_launched;
      stats.rollout_node_invocations += rr.invocations;
      const double alt_score = score_for(rr.outcome, objective);
      const auto pref =
          preference_from_scores(realized, inv.chosen_index, alt_score, alt);
      if (!pref.has_value()) continue;
      pairs.push_back(PreferencePair{inv.role, inv.position, inv.observation,
                                     inv.action_set, pref->winner_index,
                                     pref->loser_index, pref->margin});
      ++stats.pairs_emitted;
    }
  }

  if (auto ex = supervised_example_for(inst, trace); ex.has_value()) {
    supervised.push_back(std::move(*ex));
  }
  return stats;
}

}  // namespace flowtune
