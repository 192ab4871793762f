// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/oracle.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include "flowtune/metrics.hpp"

namespace flowtune {

namespace {

// Advances idx to the next k-combination of {0..n-1} in lexicographic order.
// Returns false after the last one.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[static_cast<std::size_t>(i)] < n - (k - i)) {
      ++idx[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) {
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

OracleResult oracle_best(const Instance& inst, const FlowSpec& flow, std::int64_t limit) {
  if (flow.max_retrievals < 1) throw ConfigError("oracle_best: max_retrievals must be >= 1");
  if (inst.candidates.empty()) throw MalformedInstanceError("oracle_best: no candidates");
  const int n = static_cast<int>(inst.candidates.size());
  const int cap = std::min(flow.max_retrievals, n);
  const std::vector<Token> question = inst.question.tokens();

  OracleResult best;
  std::int64_t visited = 0;
  const auto charge = [&](std::int64_t units) {
    visited += units;
    if (visited > limit) throw ConfigError("oracle_best: combination limit exceeded");
  };

  for (int k = 1; k <= cap; ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    do {
      charge(1);
      std::set<DocId> retrieved;
      for (int i : idx) retrieved.insert(inst.candidates[static_cast<std::size_t>(i)].id);
      best.best_support_f1 = std::max(best.best_support_f1,
                                      support_f1(retrieved, inst.gold_support));

      for (int i : idx) {
        const Doc& doc = inst.candidates[static_cast<std::size_t>(i)];
        std::vector<Token> entities{doc.subject, doc.object};
        std::sort(entities.begin(), entities.end());
        entities.erase(std::unique(entities.begin(), entities.end()), entities.end());
        for (const Token& entity : entities) {
          charge(1);
          std::vector<Token> verbose = question;
          const std::vector<Token> doc_tokens = doc.tokens();
          verbose.insert(verbose.end(), doc_tokens.begin(), doc_tokens.end());
          verbose.push_back(entity);
          std::set<Token> distinct(verbose.begin(), verbose.end());
          for (const Token& token : distinct) {
            charge(1);
            best.best_answer_f1 = std::max(best.best_answer_f1,
                                           answer_f1({token}, inst.gold_answers));
          }
        }
      }
    } while (next_combination(idx, n));
  }
  return best;
}

}  // namespace flowtune
