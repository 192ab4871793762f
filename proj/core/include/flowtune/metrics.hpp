// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "flowtune/dataset.hpp"
#include "flowtune/types.hpp"

namespace flowtune {

// Token-set F1 against the best-matching gold answer set. Empty prediction or
// empty intersection scores 0 for that gold; the maximum over golds is
// returned. Gold sets must be non-empty.
double answer_f1(const std::set<Token>& predicted,
                 const std::vector<std::set<Token>>& golds);

// Set-overlap F1 between retrieved doc ids and gold support ids. Both empty
// scores 1, exactly one empty scores 0.
double support_f1(const std::set<DocId>& retrieved, const std::set<DocId>& gold);

// Exact-match accuracy over aligned prediction/label vectors.
double sufficiency_accuracy(const std::vector<bool>& predicted,
                            const std::vector<bool>& labels);

// Projects a concise answer onto the retrieved documents. If the answer is
// already a subset of some single doc's tokens it is returned unchanged;
// otherwise the result is the single entity token (over all scratchpad docs,
// in token order) with maximal overlap with the answer, first maximum wins.
std::set<Token> enforce_grounded(const std::set<Token>& concise,
                                 const std::vector<Doc>& scratchpad_docs);

// Paired sufficiency decision: of the two instances sharing a pair id, the one
// with the higher sufficiency score is predicted answerable, the other not.
// Ties go to the lexicographically smaller instance id. Returns predictions
// in argument order; exactly one is true.
std::pair<bool, bool> pairwise_infer(const std::string& id_a, double score_a,
                                     const std::string& id_b, double score_b);

}  // namespace flowtune
