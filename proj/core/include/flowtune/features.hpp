// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowtune/flow.hpp"

namespace flowtune {

// Result of walking the question's relation chain through the scratchpad:
// starting at the head entity, repeatedly take the first scratchpad doc whose
// subject is the current entity and whose relation is the next question
// relation. Gold-free; everything here is derived from observable state.
struct ChainWalk {
  Token frontier;      // entity reached so far (head when depth == 0)
  int depth = 0;       // relations matched
  bool complete = false;
  DocId last_doc = -1; // doc that produced the frontier, -1 at depth 0
};

ChainWalk walk_chain(const std::vector<Token>& question,
                     const std::vector<Doc>& scratchpad);

// Named indicator features over (observation, action), one fixed index each.
// All features are {0,1} and computable from the node's observation alone.
enum class Feature : std::uint16_t {
  // QueryGen, action = (entity, relation)
  QgEntityIsHead = 0,
  QgEntityInScratchpad,
  QgEntityIsFrontier,
  QgRelationIsNext,       // relation == first question relation past the walk
  QgRelationCovered,      // relation already present in some scratchpad doc
  QgHeadFresh,            // entity == head and scratchpad empty
  QgFrontierNext,         // EntityIsFrontier and RelationIsNext
  // Retrieve, action = doc
  RtSubjectMatches,       // doc.subject == query.entity
  RtRelationMatches,      // doc.relation == query.relation
  RtObjectMatches,        // doc.object == query.entity
  RtExactMatch,           // subject and relation both match
  RtOverlap0,             // |{query.entity, query.relation} ∩ doc tokens| buckets
  RtOverlap1,
  RtOverlap2,
  // StopRetrieval, action = stop | continue, crossed with state predicates
  SrStopChainComplete,
  SrStopChainIncomplete,
  SrContinueChainComplete,
  SrContinueChainIncomplete,
  SrStopRelationsCovered,
  SrStopScratch1,         // scratchpad size buckets, active on stop
  SrStopScratch2,
  SrStopScratch3,
  SrStopScratch4Plus,
  // VerboseAnswer, action = (doc, entity)
  VaEntityIsObject,
  VaEntityIsSubject,
  VaDocRelationIsLast,    // doc.relation == last question relation
  VaEntityIsChainEnd,     // walk complete and entity == frontier
  VaDocIsWalkLast,        // walk complete and doc produced the frontier
  VaEntityInQuestion,
  // ConciseAnswer, action = token
  CaTokenIsEntity,
  CaTokenIsRelation,
  CaTokenInQuestion,
  CaTokenIsVerboseTail,   // token == last verbose token (the chosen entity)
  CaTokenIsDocObject,     // token == object slot of the verbose doc segment
  // Sufficiency, action = sufficient | insufficient
  SfSufficientChainComplete,
  SfSufficientChainIncomplete,
  SfInsufficientChainComplete,
  SfInsufficientChainIncomplete,
  SfSufficientRelationsCovered,
  SfSufficientScratch1,
  SfSufficientScratch2,
  SfSufficientScratch3,
  SfSufficientScratch4Plus,

  Count,
};

const char* feature_name(Feature f);

// Deterministic map from (observation, action) to the active feature indices,
// sorted ascending. All nodes share one feature space; policies keep
// independent weight vectors over it.
class FeatureMap {
 public:
  static constexpr int dimension() { return static_cast<int>(Feature::Count); }

  std::vector<int> active(const Observation& obs, const Action& action) const;
};

}  // namespace flowtune
