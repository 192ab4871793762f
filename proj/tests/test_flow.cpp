// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <vector>

#include "flowtune/dataset.hpp"
#include "flowtune/features.hpp"
#include "flowtune/flow.hpp"
#include "flowtune/policy.hpp"
#include "flowtune/rollout.hpp"

using namespace flowtune;

namespace {

// Two-hop instance with a hand-picked id layout: the lowest doc id belongs to
// the SECOND chain hop, so an untrained (all-zero) policy retrieves an
// off-chain-start doc and answers off-document.
Instance crafted_two_hop() {
  Instance inst;
  inst.id = "crafted";
  inst.hops = 2;
  inst.question.head = entity_token(5);
  inst.question.relations = {relation_token(10), relation_token(11)};
  const Doc d2{0, entity_token(7), relation_token(11), entity_token(6)};  // hop 2
  const Doc d1{1, entity_token(5), relation_token(10), entity_token(7)};  // hop 1
  const Doc f1{2, entity_token(7), relation_token(10), entity_token(5)};
  const Doc f2{3, entity_token(6), relation_token(11), entity_token(7)};
  inst.candidates = {d2, d1, f1, f2};
  inst.gold_support = {0, 1};
  inst.gold_answers = {{entity_token(6)}};
  inst.answerable = true;
  return inst;
}

PolicySet always_continue_policies() {
  PolicySet p = zero_policies();
  auto& w = p.at(NodeRole::StopRetrieval).weights;
  w[static_cast<int>(Feature::SrContinueChainComplete)] = 1.0;
  w[static_cast<int>(Feature::SrContinueChainIncomplete)] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("answerable trace has 3t+2 invocations") {
  const Instance inst = crafted_two_hop();
  const FlowSpec flow;  // answerable, cap 4

  // Zero policies stop after one retrieval: t = 1.
  const Trace zero = run_episode(flow, zero_policies(), inst);
  CHECK(zero.invocations.size() == 5);
  CHECK(zero.final_state.loop_count == 1);

  // Prior policies walk the two-hop chain: t = 2.
  const Trace prior = run_episode(flow, prior_policies(), inst);
  CHECK(prior.invocations.size() == 8);
  CHECK(prior.final_state.loop_count == 2);

  // A policy that never stops runs to the retrieval cap: t = 4.
  const Trace capped = run_episode(flow, always_continue_policies(), inst);
  CHECK(capped.invocations.size() == 14);
  CHECK(capped.final_state.loop_count == 4);

  CHECK(zero.outcome.terminal);
  CHECK(prior.outcome.terminal);
  CHECK(capped.outcome.terminal);
}

TEST_CASE("full trace has 3t+3 invocations and a sufficiency verdict") {
  const Instance inst = crafted_two_hop();
  FlowSpec flow;
  flow.variant = FlowVariant::Full;
  const Trace t = run_episode(flow, zero_policies(), inst);
  CHECK(t.invocations.size() == 6);
  CHECK(t.invocations.back().role == NodeRole::Sufficiency);
  REQUIRE(t.outcome.sufficiency_correct.has_value());
  // Zero weights pick index 0 = "sufficient"; the instance is answerable.
  CHECK(*t.outcome.sufficiency_correct);
}

TEST_CASE("role order within the trace follows the flow") {
  const Instance inst = crafted_two_hop();
  const Trace t = run_episode(FlowSpec{}, prior_policies(), inst);
  const std::vector<NodeRole> expect{
      NodeRole::QueryGen,      NodeRole::Retrieve,     NodeRole::StopRetrieval,
      NodeRole::QueryGen,      NodeRole::Retrieve,     NodeRole::StopRetrieval,
      NodeRole::VerboseAnswer, NodeRole::ConciseAnswer};
  REQUIRE(t.invocations.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(t.invocations[i].role == expect[i]);
    CHECK(t.invocations[i].position == static_cast<int>(i));
  }
}

TEST_CASE("query actions enumerate known entities times question relations") {
  const Instance inst = crafted_two_hop();
  ConversationState state;
  state.question = inst.question.tokens();
  const ActionSet initial = action_set_for(NodeRole::QueryGen, state, inst);
  // Only the head entity is known; two distinct question relations.
  REQUIRE(initial.actions.size() == 2);
  CHECK(std::get<QueryAction>(initial.actions[0]) ==
        QueryAction{entity_token(5), relation_token(10)});
  CHECK(std::get<QueryAction>(initial.actions[1]) ==
        QueryAction{entity_token(5), relation_token(11)});

  state.scratchpad = {0};  // doc (e7, r11, e6) adds entities e6, e7
  const ActionSet grown = action_set_for(NodeRole::QueryGen, state, inst);
  REQUIRE(grown.actions.size() == 6);  // {e5, e6, e7} x {r10, r11}
  CHECK(std::get<QueryAction>(grown.actions[0]) ==
        QueryAction{entity_token(5), relation_token(10)});
  CHECK(std::get<QueryAction>(grown.actions[5]) ==
        QueryAction{entity_token(7), relation_token(11)});
}

TEST_CASE("retrieve actions are the unretrieved candidates by id") {
  const Instance inst = crafted_two_hop();
  ConversationState state;
  state.question = inst.question.tokens();
  state.query_history = {QueryAction{entity_token(5), relation_token(10)}};
  state.scratchpad = {1};
  const ActionSet set = action_set_for(NodeRole::Retrieve, state, inst);
  REQUIRE(set.actions.size() == 3);
  CHECK(std::get<RetrieveAction>(set.actions[0]).doc == 0);
  CHECK(std::get<RetrieveAction>(set.actions[1]).doc == 2);
  CHECK(std::get<RetrieveAction>(set.actions[2]).doc == 3);
}

TEST_CASE("verbose actions pair scratchpad docs with their entities") {
  const Instance inst = crafted_two_hop();
  const Trace t = run_episode(FlowSpec{}, prior_policies(), inst);
  const Invocation& verbose = t.invocations[6];
  REQUIRE(verbose.role == NodeRole::VerboseAnswer);
  // Two docs, two distinct entities each: four actions, doc id major.
  REQUIRE(verbose.action_set.actions.size() == 4);
  CHECK(std::get<VerboseAction>(verbose.action_set.actions[0]) ==
        VerboseAction{0, entity_token(6)});
  CHECK(std::get<VerboseAction>(verbose.action_set.actions[1]) ==
        VerboseAction{0, entity_token(7)});
  CHECK(std::get<VerboseAction>(verbose.action_set.actions[2]) ==
        VerboseAction{1, entity_token(5)});
  CHECK(std::get<VerboseAction>(verbose.action_set.actions[3]) ==
        VerboseAction{1, entity_token(7)});
}

TEST_CASE("verbose layout is question, doc triple, chosen entity") {
  const Instance inst = crafted_two_hop();
  const Trace t = run_episode(FlowSpec{}, zero_policies(), inst);
  // Zero policy retrieved doc 0 = (e7, r11, e6) and chose entity e6.
  const std::vector<Token> expect{entity_token(5),   relation_token(10), relation_token(11),
                                  entity_token(7),   relation_token(11), entity_token(6),
                                  entity_token(6)};
  REQUIRE(t.final_state.verbose_answer.has_value());
  CHECK(*t.final_state.verbose_answer == expect);

  // Concise actions are the distinct verbose tokens in sorted order.
  const Invocation& concise = t.invocations[4];
  REQUIRE(concise.role == NodeRole::ConciseAnswer);
  REQUIRE(concise.action_set.actions.size() == 5);
  CHECK(std::get<ConciseAction>(concise.action_set.actions[0]).token == entity_token(5));
  CHECK(std::get<ConciseAction>(concise.action_set.actions[4]).token == relation_token(11));
  // Zero weights pick the lowest token: the question head, which is not in
  // the retrieved doc. Answer F1 is zero.
  CHECK(*t.final_state.concise_answer == std::vector<Token>{entity_token(5)});
  CHECK(t.outcome.answer_f1 == 0.0);
}

TEST_CASE("observations project only role-relevant state and no gold labels") {
  const Instance inst = crafted_two_hop();
  const Trace t = run_episode(FlowSpec{}, prior_policies(), inst);

  const Observation& query_obs = t.invocations[0].observation;
  CHECK(query_obs.question == inst.question.tokens());
  CHECK(query_obs.scratchpad.empty());
  CHECK(query_obs.candidates.empty());
  CHECK(!query_obs.last_query.has_value());
  CHECK(query_obs.verbose.empty());

  const Observation& retrieve_obs = t.invocations[1].observation;
  CHECK(retrieve_obs.question.empty());
  REQUIRE(retrieve_obs.last_query.has_value());
  CHECK(*retrieve_obs.last_query == QueryAction{entity_token(5), relation_token(10)});
  CHECK(retrieve_obs.candidates.size() == inst.candidates.size());

  const Observation& stop_obs = t.invocations[2].observation;
  CHECK(stop_obs.scratchpad.size() == 1);
  CHECK(stop_obs.candidates.empty());

  const Observation& concise_obs = t.invocations[7].observation;
  CHECK(!concise_obs.verbose.empty());
  CHECK(concise_obs.scratchpad.empty());
}

TEST_CASE("outcome scores and horizons") {
  const Instance inst = crafted_two_hop();
  const Trace prior = run_episode(FlowSpec{}, prior_policies(), inst);
  CHECK(prior.outcome.support_f1 == 1.0);
  CHECK(prior.outcome.horizon(ObjectiveKind::Support));
  CHECK(prior.outcome.horizon(ObjectiveKind::Answer));
  CHECK(!prior.outcome.horizon(ObjectiveKind::Sufficiency));
  CHECK(!prior.outcome.sufficiency_correct.has_value());

  const Trace zero = run_episode(FlowSpec{}, zero_policies(), inst);
  // Retrieved {doc 0}, gold {0, 1}: P = 1, R = 1/2.
  CHECK(zero.outcome.support_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("resume with the realized action reproduces the outcome") {
  const Instance inst = crafted_two_hop();
  FlowSpec flow;
  flow.variant = FlowVariant::Full;
  const Trace t = run_episode(flow, prior_policies(), inst);
  for (const Invocation& inv : t.invocations) {
    if (inv.role == NodeRole::ConciseAnswer) continue;
    const ObjectiveKind objective = objective_of(inv.role);
    const ResumeResult rr = resume_from(flow, prior_policies(), inst, t, inv.position,
                                        inv.chosen_index, objective);
    CHECK(score_for(rr.outcome, objective) ==
          score_for(t.outcome, objective));
  }
}

TEST_CASE("support-objective continuations stop at loop exit") {
  const Instance inst = crafted_two_hop();
  const FlowSpec flow;
  const Trace t = run_episode(flow, prior_policies(), inst);
  const ResumeResult rr = resume_from(flow, prior_policies(), inst, t, 0, 1,
                                      ObjectiveKind::Support);
  CHECK(rr.outcome.horizon(ObjectiveKind::Support));
  CHECK(rr.role_invocations[static_cast<int>(NodeRole::VerboseAnswer)] == 0);
  CHECK(rr.role_invocations[static_cast<int>(NodeRole::ConciseAnswer)] == 0);
  CHECK(!rr.outcome.terminal);

  const ResumeResult answer = resume_from(flow, prior_policies(), inst, t, 0, 1,
                                          ObjectiveKind::Answer);
  CHECK(answer.outcome.horizon(ObjectiveKind::Answer));
  CHECK(answer.role_invocations[static_cast<int>(NodeRole::ConciseAnswer)] == 1);
}

TEST_CASE("resume restores the snapshot exactly and repeatably") {
  const Instance inst = crafted_two_hop();
  const FlowSpec flow;
  const Trace t = run_episode(flow, prior_policies(), inst);
  const std::string before = dump_trace(t);
  const ResumeResult a = resume_from(flow, prior_policies(), inst, t, 2, 1,
                                     ObjectiveKind::Support);
  const ResumeResult b = resume_from(flow, prior_policies(), inst, t, 2, 1,
                                     ObjectiveKind::Support);
  CHECK(score_for(a.outcome, ObjectiveKind::Support) ==
        score_for(b.outcome, ObjectiveKind::Support));
  CHECK(a.invocations == b.invocations);
  // Deviations never mutate the recorded trace.
  CHECK(dump_trace(t) == before);
}

TEST_CASE("resume validates the snapshot against the instance") {
  const Instance inst = crafted_two_hop();
  const FlowSpec flow;
  const Trace t = run_episode(flow, zero_policies(), inst);

  Instance drifted = inst;
  drifted.candidates.push_back(
      Doc{4, entity_token(9), relation_token(10), entity_token(5)});
  CHECK_THROWS_AS(
      resume_from(flow, zero_policies(), drifted, t, 1, 1, ObjectiveKind::Support),
      SequencingError);

  CHECK_THROWS_AS(resume_from(flow, zero_policies(), inst, t, 99, 0,
                              ObjectiveKind::Support),
                  SequencingError);
  CHECK_THROWS_AS(resume_from(flow, zero_policies(), inst, t, 1, 99,
                              ObjectiveKind::Support),
                  SequencingError);
}

TEST_CASE("continuations cannot launch continuations") {
  const Instance inst = crafted_two_hop();
  const FlowSpec flow;
  const Trace t = run_episode(flow, zero_policies(), inst);
  CHECK(detail::rollout_depth() == 0);
  {
    detail::RolloutDepthGuard guard;
    CHECK(detail::rollout_depth() == 1);
    CHECK_THROWS_AS(
        resume_from(flow, zero_policies(), inst, t, 0, 1, ObjectiveKind::Support),
        SequencingError);
  }
  CHECK(detail::rollout_depth() == 0);
  CHECK_NOTHROW(resume_from(flow, zero_policies(), inst, t, 0, 1, ObjectiveKind::Support));
}

TEST_CASE("trace dumps are byte identical across reruns") {
  const Instance inst = crafted_two_hop();
  const Trace a = run_episode(FlowSpec{}, prior_policies(), inst);
  const Trace b = run_episode(FlowSpec{}, prior_policies(), inst);
  CHECK(dump_trace(a) == dump_trace(b));
  CHECK(!dump_trace(a).empty());
}

TEST_CASE("flow validation requires enough candidates") {
  Instance inst = crafted_two_hop();
  FlowSpec flow;
  flow.max_retrievals = 5;
  CHECK_THROWS_AS(validate_for_flow({inst}, flow), MalformedInstanceError);
  flow.max_retrievals = 4;
  CHECK_NOTHROW(validate_for_flow({inst}, flow));
  flow.max_retrievals = 0;
  CHECK_THROWS_AS(validate_for_flow({inst}, flow), ConfigError);
  CHECK_THROWS_AS(run_episode(flow, zero_policies(), inst), ConfigError);
}
