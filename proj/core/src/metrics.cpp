// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/metrics.hpp"

#include <algorithm>

namespace flowtune {

namespace {

template <typename T>
std::size_t intersection_size(const std::set<T>& a, const std::set<T>& b) {
  if (a.size() > b.size()) return intersection_size(b, a);
  std::size_t n = 0;
  for (const auto& x : a) n += b.count(x);
  return n;
}

}  // namespace

double answer_f1(const std::set<Token>& predicted,
                 const std::vector<std::set<Token>>& golds) {
  if (golds.empty()) throw MalformedInstanceError("answer_f1: no gold answer sets");
  double best = 0.0;
  for (const auto& gold : golds) {
    if (gold.empty()) throw MalformedInstanceError("answer_f1: empty gold answer set");
    if (predicted.empty()) continue;
    const double inter = static_cast<double>(intersection_size(predicted, gold));
    if (inter == 0.0) continue;
    const double p = inter / static_cast<double>(predicted.size());
    const double r = inter / static_cast<double>(gold.size());
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double support_f1(const std::set<DocId>& retrieved, const std::set<DocId>& gold) {
  if (retrieved.empty() && gold.empty()) return 1.0;
  if (retrieved.empty() || gold.empty()) return 0.0;
  const double inter = static_cast<double>(intersection_size(retrieved, gold));
  if (inter == 0.0) return 0.0;
  const double p = inter / static_cast<double>(retrieved.size());
  const double r = inter / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

double sufficiency_accuracy(const std::vector<bool>& predicted,
                            const std::vector<bool>& labels) {
  if (predicted.size() != labels.size()) {
    throw ConfigError("sufficiency_accuracy: prediction/label length mismatch");
  }
  if (predicted.empty()) throw ConfigError("sufficiency_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    hits += predicted[i] == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::set<Token> enforce_grounded(const std::set<Token>& concise,
                                 const std::vector<Doc>& scratchpad_docs) {
  if (scratchpad_docs.empty()) {
    throw SequencingError("enforce_grounded: empty scratchpad");
  }
  if (!concise.empty()) {
    for (const Doc& doc : scratchpad_docs) {
      const auto toks = doc.tokens();
      const bool subset = std::all_of(concise.begin(), concise.end(), [&](const Token& t) {
        return std::find(toks.begin(), toks.end(), t) != toks.end();
      });
      if (subset) return concise;
    }
  }
  // Fall back to the best-overlapping entity over all retrieved docs. With
  // single-token overlap scores the first entity (token order) present in the
  // concise answer wins; when none overlaps, the smallest entity token wins.
  std::set<Token> entities;
  for (const Doc& doc : scratchpad_docs) {
    entities.insert(doc.subject);
    entities.insert(doc.object);
  }
  Token best{};
  std::size_t best_overlap = 0;
  bool have = false;
  for (const Token& e : entities) {
    const std::size_t overlap = concise.count(e);
    if (!have || overlap > best_overlap) {
      best = e;
      best_overlap = overlap;
      have = true;
    }
  }
  return {best};
}

std::pair<bool, bool> pairwise_infer(const std::string& id_a, double score_a,
                                     const std::string& id_b, double score_b) {
  if (id_a == id_b) throw ConfigError("pairwise_infer: identical instance ids");
  bool a_wins;
  if (score_a != score_b) {
    a_wins = score_a > score_b;
  } else {
    a_wins = id_a < id_b;
  }
  return {a_wins, !a_wins};
}

}  // namespace flowtune
