// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/flow.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "flowtune/metrics.hpp"
#include "flowtune/policy.hpp"

namespace flowtune {

std::vector<NodeRole> FlowSpec::roles() const {
  std::vector<NodeRole> r{NodeRole::QueryGen, NodeRole::Retrieve, NodeRole::StopRetrieval,
                          NodeRole::VerboseAnswer, NodeRole::ConciseAnswer};
  if (variant == FlowVariant::Full) r.push_back(NodeRole::Sufficiency);
  return r;
}

namespace {

const Doc& doc_by_id(const Instance& inst, DocId id) {
  for (const Doc& d : inst.candidates) {
    if (d.id == id) return d;
  }
  throw SequencingError("doc id " + std::to_string(id) + " not among candidates of '" +
                        inst.id + "'");
}

std::vector<Doc> scratchpad_docs(const ConversationState& state, const Instance& inst) {
  std::vector<Doc> out;
  out.reserve(state.scratchpad.size());
  for (DocId id : state.scratchpad) out.push_back(doc_by_id(inst, id));
  return out;
}

// Execution cursor. The retrieval loop runs QueryGen -> Retrieve ->
// StopRetrieval in lockstep; the loop exits when StopRetrieval picks stop or
// the retrieval cap is reached, whichever comes first.
enum class Stage : std::uint8_t {
  LoopQuery,
  LoopRetrieve,
  LoopStop,
  Verbose,
  Concise,
  Suff,
  Done,
};

NodeRole role_of(Stage s) {
  switch (s) {
    case Stage::LoopQuery: return NodeRole::QueryGen;
    case Stage::LoopRetrieve: return NodeRole::Retrieve;
    case Stage::LoopStop: return NodeRole::StopRetrieval;
    case Stage::Verbose: return NodeRole::VerboseAnswer;
    case Stage::Concise: return NodeRole::ConciseAnswer;
    case Stage::Suff: return NodeRole::Sufficiency;
    case Stage::Done: break;
  }
  throw SequencingError("no role at Done");
}

Stage stage_of(NodeRole role) {
  switch (role) {
    case NodeRole::QueryGen: return Stage::LoopQuery;
    case NodeRole::Retrieve: return Stage::LoopRetrieve;
    case NodeRole::StopRetrieval: return Stage::LoopStop;
    case NodeRole::VerboseAnswer: return Stage::Verbose;
    case NodeRole::ConciseAnswer: return Stage::Concise;
    case NodeRole::Sufficiency: return Stage::Suff;
  }
  throw SequencingError("unknown role");
}

// Whether the objective's score is already fixed at (stage, state): support
// once the loop has exited, answer once a concise answer exists, sufficiency
// once the prediction exists.
bool objective_determined(ObjectiveKind kind, Stage stage, const ConversationState& state) {
  switch (kind) {
    case ObjectiveKind::Support: return stage != Stage::LoopQuery &&
                                        stage != Stage::LoopRetrieve &&
                                        stage != Stage::LoopStop;
    case ObjectiveKind::Answer: return state.concise_answer.has_value();
    case ObjectiveKind::Sufficiency: return state.sufficiency_pred.has_value();
  }
  throw SequencingError("unknown objective");
}

EpisodeOutcome make_outcome(const ConversationState& state, Stage stage,
                            const Instance& inst) {
  EpisodeOutcome out;
  out.terminal = stage == Stage::Done;
  if (objective_determined(ObjectiveKind::Support, stage, state)) {
    std::set<DocId> retrieved(state.scratchpad.begin(), state.scratchpad.end());
    out.support_f1 = support_f1(retrieved, inst.gold_support);
    out.horizon_reached[static_cast<std::size_t>(ObjectiveKind::Support)] = true;
  }
  if (state.concise_answer.has_value()) {
    std::set<Token> predicted(state.concise_answer->begin(), state.concise_answer->end());
    out.answer_f1 = answer_f1(predicted, inst.gold_answers);
    out.horizon_reached[static_cast<std::size_t>(ObjectiveKind::Answer)] = true;
  }
  if (state.sufficiency_pred.has_value()) {
    out.sufficiency_correct = *state.sufficiency_pred == inst.answerable;
    out.horizon_reached[static_cast<std::size_t>(ObjectiveKind::Sufficiency)] = true;
  }
  return out;
}

struct RunResult {
  ConversationState state;
  Stage stage = Stage::Done;
  int invocations = 0;
  std::array<int, kNumRoles> role_invocations{};
};

// Single runner behind run_episode and resume_from. `forced_index`, when
// >= 0, replaces the policy's choice at the first invocation. `record`
// receives invocations and pre-state snapshots when non-null. Continuations
// pass depth 1 and may not nest further.
RunResult run_stages(const FlowSpec& flow, const PolicySet& policies, const Instance& inst,
                     ConversationState state, Stage stage, int forced_index,
                     std::optional<ObjectiveKind> stop_objective, Mode mode,
                     std::uint64_t seed, int position0, Trace* record) {
  static const FeatureMap fmap;
  RunResult result;
  int position = position0;
  bool force_pending = forced_index >= 0;

  while (stage != Stage::Done) {
    if (stop_objective.has_value() &&
        objective_determined(*stop_objective, stage, state)) {
      break;
    }
    const NodeRole role = role_of(stage);
    Observation obs = observation_for(role, state, inst);
    ActionSet actions = action_set_for(role, state, inst);
    if (actions.actions.empty()) {
      throw MalformedInstanceError("empty action set at " + std::string(role_name(role)) +
                                   " (instance '" + inst.id + "')");
    }

    Selection sel;
    if (force_pending) {
      if (forced_index >= static_cast<int>(actions.actions.size())) {
        throw SequencingError("forced action index out of range");
      }
      sel.index = forced_index;
      sel.log_prob = log_prob(policies.at(role).weights, fmap, obs, actions, forced_index);
      force_pending = false;
    } else {
      Rng inv_rng(derive_seed(seed, static_cast<std::uint64_t>(position)));
      sel = select(policies.at(role), fmap, obs, actions, mode, &inv_rng);
    }

    if (record != nullptr) {
      record->pre_states.push_back(state);
      record->invocations.push_back(
          Invocation{position, role, obs, actions, sel.index, sel.log_prob});
    }
    ++result.invocations;
    ++result.role_invocations[static_cast<std::size_t>(role)];
    ++position;

    const Action& act = actions.actions[static_cast<std::size_t>(sel.index)];
    switch (stage) {
      case Stage::LoopQuery:
        state.query_history.push_back(std::get<QueryAction>(act));
        stage = Stage::LoopRetrieve;
        break;
      case Stage::LoopRetrieve:
        state.scratchpad.push_back(std::get<RetrieveAction>(act).doc);
        state.loop_count += 1;
        stage = Stage::LoopStop;
        break;
      case Stage::LoopStop: {
        const bool stop = std::get<StopAction>(act).stop;
        stage = (stop || state.loop_count >= flow.max_retrievals) ? Stage::Verbose
                                                                  : Stage::LoopQuery;
        break;
      }
      case Stage::Verbose: {
        const auto& va = std::get<VerboseAction>(act);
        const Doc& doc = doc_by_id(inst, va.doc);
        std::vector<Token> verbose = state.question;
        for (const Token& t : doc.tokens()) verbose.push_back(t);
        verbose.push_back(va.entity);
        state.verbose_answer = std::move(verbose);
        stage = Stage::Concise;
        break;
      }
      case Stage::Concise:
        state.concise_answer = std::vector<Token>{std::get<ConciseAction>(act).token};
        stage = flow.variant == FlowVariant::Full ? Stage::Suff : Stage::Done;
        break;
      case Stage::Suff:
        state.sufficiency_pred = std::get<SufficiencyAction>(act).sufficient;
        stage = Stage::Done;
        break;
      case Stage::Done:
        break;
    }
  }

  result.state = std::move(state);
  result.stage = stage;
  return result;
}

thread_local int g_resume_depth = 0;

}  // namespace

namespace detail {

RolloutDepthGuard::RolloutDepthGuard() {
  if (g_resume_depth >= 1) {
    throw SequencingError("rollout recursion: a continuation may not launch rollouts");
  }
  ++g_resume_depth;
}

RolloutDepthGuard::~RolloutDepthGuard() { --g_resume_depth; }

int rollout_depth() { return g_resume_depth; }

}  // namespace detail

Observation observation_for(NodeRole role, const ConversationState& state,
                            const Instance& inst) {
  Observation obs;
  obs.role = role;
  switch (role) {
    case NodeRole::QueryGen:
    case NodeRole::StopRetrieval:
    case NodeRole::VerboseAnswer:
    case NodeRole::Sufficiency:
      obs.question = state.question;
      obs.scratchpad = scratchpad_docs(state, inst);
      break;
    case NodeRole::Retrieve:
      if (state.query_history.empty()) {
        throw SequencingError("Retrieve observation requested before any query");
      }
      obs.last_query = state.query_history.back();
      obs.candidates = inst.candidates;
      break;
    case NodeRole::ConciseAnswer:
      if (!state.verbose_answer.has_value()) {
        throw SequencingError("ConciseAnswer observation requested without a verbose answer");
      }
      obs.question = state.question;
      obs.verbose = *state.verbose_answer;
      break;
  }
  return obs;
}

ActionSet action_set_for(NodeRole role, const ConversationState& state,
                         const Instance& inst) {
  ActionSet set;
  set.role = role;
  switch (role) {
    case NodeRole::QueryGen: {
      if (state.question.empty()) throw SequencingError("empty question");
      std::set<Token> entities{state.question.front()};
      for (DocId id : state.scratchpad) {
        const Doc& d = doc_by_id(inst, id);
        entities.insert(d.subject);
        entities.insert(d.object);
      }
      std::set<Token> relations(inst.question.relations.begin(),
                                inst.question.relations.end());
      for (const Token& e : entities) {
        for (const Token& r : relations) {
          set.actions.push_back(QueryAction{e, r});
        }
      }
      break;
    }
    case NodeRole::Retrieve: {
      std::set<DocId> seen(state.scratchpad.begin(), state.scratchpad.end());
      std::vector<DocId> ids;
      for (const Doc& d : inst.candidates) {
        if (seen.count(d.id) == 0) ids.push_back(d.id);
      }
      std::sort(ids.begin(), ids.end());
      for (DocId id : ids) set.actions.push_back(RetrieveAction{id});
      break;
    }
    case NodeRole::StopRetrieval:
      set.actions.push_back(StopAction{true});   // stop
      set.actions.push_back(StopAction{false});  // continue
      break;
    case NodeRole::VerboseAnswer: {
      std::vector<Doc> docs = scratchpad_docs(state, inst);
      std::sort(docs.begin(), docs.end(),
                [](const Doc& a, const Doc& b) { return a.id < b.id; });
      for (const Doc& d : docs) {
        std::set<Token> ents{d.subject, d.object};
        for (const Token& e : ents) set.actions.push_back(VerboseAction{d.id, e});
      }
      break;
    }
    case NodeRole::ConciseAnswer: {
      if (!state.verbose_answer.has_value()) {
        throw SequencingError("ConciseAnswer action set requested without a verbose answer");
      }
      std::set<Token> tokens(state.verbose_answer->begin(), state.verbose_answer->end());
      for (const Token& t : tokens) set.actions.push_back(ConciseAction{t});
      break;
    }
    case NodeRole::Sufficiency:
      set.actions.push_back(SufficiencyAction{true});   // sufficient
      set.actions.push_back(SufficiencyAction{false});  // insufficient
      break;
  }
  if (set.actions.empty() && role != NodeRole::Retrieve) {
    throw MalformedInstanceError("empty action set at " + std::string(role_name(role)) +
                                 " (instance '" + inst.id + "')");
  }
  return set;
}

Trace run_episode(const FlowSpec& flow, const PolicySet& policies, const Instance& inst,
                  Mode mode, std::uint64_t seed) {
  if (flow.max_retrievals < 1) throw ConfigError("max_retrievals must be >= 1");
  ConversationState state;
  state.question = inst.question.tokens();

  Trace trace;
  trace.instance_id = inst.id;
  RunResult run = run_stages(flow, policies, inst, std::move(state), Stage::LoopQuery,
                             /*forced_index=*/-1, std::nullopt, mode, seed,
                             /*position0=*/0, &trace);
  trace.final_state = std::move(run.state);
  trace.outcome = make_outcome(trace.final_state, run.stage, inst);
  return trace;
}

ResumeResult resume_from(const FlowSpec& flow, const PolicySet& policies,
                         const Instance& inst, const Trace& trace, int position,
                         int forced_action_index, ObjectiveKind stop_objective) {
  detail::RolloutDepthGuard guard;
  if (position < 0 || position >= static_cast<int>(trace.invocations.size())) {
    throw SequencingError("resume position out of range");
  }
  if (forced_action_index < 0) throw SequencingError("forced action index out of range");
  const Invocation& inv = trace.invocations[static_cast<std::size_t>(position)];
  const ConversationState& snapshot = trace.pre_states[static_cast<std::size_t>(position)];

  // The action set recomputed from the snapshot must match the recorded one;
  // a mismatch means the trace was produced by a different instance or flow.
  ActionSet check = action_set_for(inv.role, snapshot, inst);
  if (check != inv.action_set) {
    throw SequencingError("trace snapshot does not match instance at position " +
                          std::to_string(position));
  }

  RunResult run = run_stages(flow, policies, inst, snapshot, stage_of(inv.role),
                             forced_action_index, stop_objective, Mode::Greedy,
                             /*seed=*/0, position, /*record=*/nullptr);
  ResumeResult out;
  out.outcome = make_outcome(run.state, run.stage, inst);
  out.invocations = run.invocations;
  out.role_invocations = run.role_invocations;
  return out;
}

std::string dump_trace(const Trace& trace) {
  std::string out;
  for (const Invocation& inv : trace.invocations) {
    nlohmann::ordered_json j{{"position", inv.position},
                             {"role", role_name(inv.role)},
                             {"action_set_size", inv.action_set.actions.size()},
                             {"chosen_index", inv.chosen_index},
                             {"log_prob", inv.log_prob_chosen}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void validate_for_flow(const std::vector<Instance>& instances, const FlowSpec& flow) {
  if (flow.max_retrievals < 1) throw ConfigError("max_retrievals must be >= 1");
  for (const Instance& inst : instances) {
    validate_instance(inst);
    if (static_cast<int>(inst.candidates.size()) < flow.max_retrievals) {
      throw MalformedInstanceError("instance '" + inst.id + "' has fewer candidates than " +
                                   "the retrieval cap");
    }
  }
}

}  // namespace flowtune
