// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/features.hpp"

#include <algorithm>

namespace flowtune {

ChainWalk walk_chain(const std::vector<Token>& question, const std::vector<Doc>& scratchpad) {
  if (question.empty()) throw SequencingError("walk_chain: empty question");
  ChainWalk walk;
  walk.frontier = question.front();
  const int k = static_cast<int>(question.size()) - 1;
  while (walk.depth < k) {
    const Token& rel = question[static_cast<std::size_t>(walk.depth) + 1];
    const Doc* next = nullptr;
    for (const Doc& d : scratchpad) {
      if (d.subject == walk.frontier && d.relation == rel) {
        next = &d;
        break;
      }
    }
    if (next == nullptr) break;
    walk.frontier = next->object;
    walk.last_doc = next->id;
    ++walk.depth;
  }
  walk.complete = walk.depth == k;
  return walk;
}

namespace {

void push(std::vector<int>& out, Feature f) { out.push_back(static_cast<int>(f)); }

bool in_question(const std::vector<Token>& question, const Token& t) {
  return std::find(question.begin(), question.end(), t) != question.end();
}

int scratch_bucket(std::size_t n) { return n >= 4 ? 3 : static_cast<int>(n) - 1; }

void query_gen_features(const Observation& obs, const QueryAction& qa,
                        std::vector<int>& out) {
  const ChainWalk walk = walk_chain(obs.question, obs.scratchpad);
  const Token head = obs.question.front();
  if (qa.entity == head) push(out, Feature::QgEntityIsHead);
  bool in_scratch = false;
  bool rel_covered = false;
  for (const Doc& d : obs.scratchpad) {
    in_scratch = in_scratch || d.subject == qa.entity || d.object == qa.entity;
    rel_covered = rel_covered || d.relation == qa.relation;
  }
  if (in_scratch) push(out, Feature::QgEntityInScratchpad);
  const bool is_frontier = qa.entity == walk.frontier;
  const bool next_rel =
      !walk.complete && qa.relation == obs.question[static_cast<std::size_t>(walk.depth) + 1];
  if (is_frontier) push(out, Feature::QgEntityIsFrontier);
  if (next_rel) push(out, Feature::QgRelationIsNext);
  if (rel_covered) push(out, Feature::QgRelationCovered);
  if (qa.entity == head && obs.scratchpad.empty()) push(out, Feature::QgHeadFresh);
  if (is_frontier && next_rel) push(out, Feature::QgFrontierNext);
}

void retrieve_features(const Observation& obs, const RetrieveAction& ra,
                       std::vector<int>& out) {
  if (!obs.last_query.has_value()) throw SequencingError("retrieve features need a query");
  const QueryAction& q = *obs.last_query;
  const Doc* doc = nullptr;
  for (const Doc& d : obs.candidates) {
    if (d.id == ra.doc) doc = &d;
  }
  if (doc == nullptr) throw SequencingError("retrieve action names an unknown doc");
  const bool subj = doc->subject == q.entity;
  const bool rel = doc->relation == q.relation;
  if (subj) push(out, Feature::RtSubjectMatches);
  if (rel) push(out, Feature::RtRelationMatches);
  if (doc->object == q.entity) push(out, Feature::RtObjectMatches);
  if (subj && rel) push(out, Feature::RtExactMatch);
  int overlap = 0;
  overlap += doc->contains(q.entity);
  overlap += doc->contains(q.relation);
  push(out, overlap == 0 ? Feature::RtOverlap0
                         : (overlap == 1 ? Feature::RtOverlap1 : Feature::RtOverlap2));
}

void stop_features(const Observation& obs, const StopAction& sa, std::vector<int>& out) {
  const ChainWalk walk = walk_chain(obs.question, obs.scratchpad);
  if (sa.stop) {
    push(out, walk.complete ? Feature::SrStopChainComplete : Feature::SrStopChainIncomplete);
    bool covered = true;
    for (std::size_t i = 1; i < obs.question.size(); ++i) {
      bool found = false;
      for (const Doc& d : obs.scratchpad) found = found || d.relation == obs.question[i];
      covered = covered && found;
    }
    if (covered) push(out, Feature::SrStopRelationsCovered);
    switch (scratch_bucket(obs.scratchpad.size())) {
      case 0: push(out, Feature::SrStopScratch1); break;
      case 1: push(out, Feature::SrStopScratch2); break;
      case 2: push(out, Feature::SrStopScratch3); break;
      default: push(out, Feature::SrStopScratch4Plus); break;
    }
  } else {
    push(out, walk.complete ? Feature::SrContinueChainComplete
                            : Feature::SrContinueChainIncomplete);
  }
}

void verbose_features(const Observation& obs, const VerboseAction& va,
                      std::vector<int>& out) {
  const ChainWalk walk = walk_chain(obs.question, obs.scratchpad);
  const Doc* doc = nullptr;
  for (const Doc& d : obs.scratchpad) {
    if (d.id == va.doc) doc = &d;
  }
  if (doc == nullptr) throw SequencingError("verbose action names a doc outside the scratchpad");
  if (va.entity == doc->object) push(out, Feature::VaEntityIsObject);
  if (va.entity == doc->subject) push(out, Feature::VaEntityIsSubject);
  if (obs.question.size() >= 2 && doc->relation == obs.question.back()) {
    push(out, Feature::VaDocRelationIsLast);
  }
  if (walk.complete && va.entity == walk.frontier) push(out, Feature::VaEntityIsChainEnd);
  if (walk.complete && va.doc == walk.last_doc) push(out, Feature::VaDocIsWalkLast);
  if (in_question(obs.question, va.entity)) push(out, Feature::VaEntityInQuestion);
}

void concise_features(const Observation& obs, const ConciseAction& ca,
                      std::vector<int>& out) {
  push(out, ca.token.kind == TokenKind::Entity ? Feature::CaTokenIsEntity
                                               : Feature::CaTokenIsRelation);
  if (in_question(obs.question, ca.token)) push(out, Feature::CaTokenInQuestion);
  if (!obs.verbose.empty() && ca.token == obs.verbose.back()) {
    push(out, Feature::CaTokenIsVerboseTail);
  }
  // Verbose layout: question tokens, then the doc's (subject, relation,
  // object), then the chosen entity. The object slot is second from the end.
  if (obs.verbose.size() >= 4 && ca.token == obs.verbose[obs.verbose.size() - 2]) {
    push(out, Feature::CaTokenIsDocObject);
  }
}

void sufficiency_features(const Observation& obs, const SufficiencyAction& sa,
                          std::vector<int>& out) {
  const ChainWalk walk = walk_chain(obs.question, obs.scratchpad);
  if (sa.sufficient) {
    push(out, walk.complete ? Feature::SfSufficientChainComplete
                            : Feature::SfSufficientChainIncomplete);
    bool covered = true;
    for (std::size_t i = 1; i < obs.question.size(); ++i) {
      bool found = false;
      for (const Doc& d : obs.scratchpad) found = found || d.relation == obs.question[i];
      covered = covered && found;
    }
    if (covered) push(out, Feature::SfSufficientRelationsCovered);
    switch (scratch_bucket(obs.scratchpad.size())) {
      case 0: push(out, Feature::SfSufficientScratch1); break;
      case 1: push(out, Feature::SfSufficientScratch2); break;
      case 2: push(out, Feature::SfSufficientScratch3); break;
      default: push(out, Feature::SfSufficientScratch4Plus); break;
    }
  } else {
    push(out, walk.complete ? Feature::SfInsufficientChainComplete
                            : Feature::SfInsufficientChainIncomplete);
  }
}

}  // namespace

std::vector<int> FeatureMap::active(const Observation& obs, const Action& action) const {
  std::vector<int> out;
  switch (obs.role) {
    case NodeRole::QueryGen:
      query_gen_features(obs, std::get<QueryAction>(action), out);
      break;
    case NodeRole::Retrieve:
      retrieve_features(obs, std::get<RetrieveAction>(action), out);
      break;
    case NodeRole::StopRetrieval:
      stop_features(obs, std::get<StopAction>(action), out);
      break;
    case NodeRole::VerboseAnswer:
      verbose_features(obs, std::get<VerboseAction>(action), out);
      break;
    case NodeRole::ConciseAnswer:
      concise_features(obs, std::get<ConciseAction>(action), out);
      break;
    case NodeRole::Sufficiency:
      sufficiency_features(obs, std::get<SufficiencyAction>(action), out);
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::QgEntityIsHead: return "qg_entity_is_head";
    case Feature::QgEntityInScratchpad: return "qg_entity_in_scratchpad";
    case Feature::QgEntityIsFrontier: return "qg_entity_is_frontier";
    case Feature::QgRelationIsNext: return "qg_relation_is_next";
    case Feature::QgRelationCovered: return "qg_relation_covered";
    case Feature::QgHeadFresh: return "qg_head_fresh";
    case Feature::QgFrontierNext: return "qg_frontier_next";
    case Feature::RtSubjectMatches: return "rt_subject_matches";
    case Feature::RtRelationMatches: return "rt_relation_matches";
    case Feature::RtObjectMatches: return "rt_object_matches";
    case Feature::RtExactMatch: return "rt_exact_match";
    case Feature::RtOverlap0: return "rt_overlap_0";
    case Feature::RtOverlap1: return "rt_overlap_1";
    case Feature::RtOverlap2: return "rt_overlap_2";
    case Feature::SrStopChainComplete: return "sr_stop_chain_complete";
    case Feature::SrStopChainIncomplete: return "sr_stop_chain_incomplete";
    case Feature::SrContinueChainComplete: return "sr_continue_chain_complete";
    case Feature::SrContinueChainIncomplete: return "sr_continue_chain_incomplete";
    case Feature::SrStopRelationsCovered: return "sr_stop_relations_covered";
    case Feature::SrStopScratch1: return "sr_stop_scratch_1";
    case Feature::SrStopScratch2: return "sr_stop_scratch_2";
    case Feature::SrStopScratch3: return "sr_stop_scratch_3";
    case Feature::SrStopScratch4Plus: return "sr_stop_scratch_4plus";
    case Feature::VaEntityIsObject: return "va_entity_is_object";
    case Feature::VaEntityIsSubject: return "va_entity_is_subject";
    case Feature::VaDocRelationIsLast: return "va_doc_relation_is_last";
    case Feature::VaEntityIsChainEnd: return "va_entity_is_chain_end";
    case Feature::VaDocIsWalkLast: return "va_doc_is_walk_last";
    case Feature::VaEntityInQuestion: return "va_entity_in_question";
    case Feature::CaTokenIsEntity: return "ca_token_is_entity";
    case Feature::CaTokenIsRelation: return "ca_token_is_relation";
    case Feature::CaTokenInQuestion: return "ca_token_in_question";
    case Feature::CaTokenIsVerboseTail: return "ca_token_is_verbose_tail";
    case Feature::CaTokenIsDocObject: return "ca_token_is_doc_object";
    case Feature::SfSufficientChainComplete: return "sf_sufficient_chain_complete";
    case Feature::SfSufficientChainIncomplete: return "sf_sufficient_chain_incomplete";
    case Feature::SfInsufficientChainComplete: return "sf_insufficient_chain_complete";
    case Feature::SfInsufficientChainIncomplete: return "sf_insufficient_chain_incomplete";
    case Feature::SfSufficientRelationsCovered: return "sf_sufficient_relations_covered";
    case Feature::SfSufficientScratch1: return "sf_sufficient_scratch_1";
    case Feature::SfSufficientScratch2: return "sf_sufficient_scratch_2";
    case Feature::SfSufficientScratch3: return "sf_sufficient_scratch_3";
    case Feature::SfSufficientScratch4Plus: return "sf_sufficient_scratch_4plus";
    case Feature::Count: break;
  }
  throw ConfigError("unknown feature");
}

}  // namespace flowtune
