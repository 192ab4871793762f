// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "flowtune/metrics.hpp"

using namespace flowtune;

namespace {

std::set<Token> toks(std::initializer_list<int> entity_ids) {
  std::set<Token> out;
  for (int id : entity_ids) out.insert(entity_token(id));
  return out;
}

}  // namespace

TEST_CASE("answer f1 exact match") {
  CHECK(answer_f1(toks({3}), {toks({3})}) == 1.0);
  CHECK(answer_f1(toks({1, 2}), {toks({1, 2})}) == 1.0);
}

TEST_CASE("answer f1 partial overlap") {
  // prediction {the, paris} against gold {paris}: P = 1/2, R = 1, F1 = 2/3.
  CHECK(answer_f1(toks({10, 11}), {toks({11})}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("answer f1 takes the best gold") {
  // {a} vs golds [{b}, {a, c}]: first gold scores 0, second P = 1, R = 1/2.
  const double got = answer_f1(toks({1}), {toks({2}), toks({1, 3})});
  CHECK(got == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("answer f1 disjoint and empty predictions score zero") {
  CHECK(answer_f1(toks({1}), {toks({2})}) == 0.0);
  CHECK(answer_f1({}, {toks({2})}) == 0.0);
}

TEST_CASE("answer f1 rejects empty gold structures") {
  CHECK_THROWS_AS(answer_f1(toks({1}), {}), MalformedInstanceError);
  CHECK_THROWS_AS(answer_f1(toks({1}), {std::set<Token>{}}), MalformedInstanceError);
}

TEST_CASE("answer f1 mixed token kinds") {
  const std::set<Token> pred{entity_token(1), relation_token(1)};
  // Gold {e1}: the relation token does not match the entity token. P = 1/2.
  CHECK(answer_f1(pred, {toks({1})}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("support f1 frozen example") {
  // {d1, d3} vs {d1, d2}: P = R = 1/2, F1 = 1/2.
  CHECK(support_f1({1, 3}, {1, 2}) == 0.5);
}

TEST_CASE("support f1 edge cases") {
  CHECK(support_f1({}, {}) == 1.0);
  CHECK(support_f1({1}, {}) == 0.0);
  CHECK(support_f1({}, {1}) == 0.0);
  CHECK(support_f1({4, 7}, {4, 7}) == 1.0);
}

TEST_CASE("support f1 asymmetric sizes") {
  // {d0} vs gold {d0, d1}: P = 1, R = 1/2.
  CHECK(support_f1({0}, {0, 1}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("sufficiency accuracy") {
  CHECK(sufficiency_accuracy({true, false, true}, {true, true, true}) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(sufficiency_accuracy({false}, {false}) == 1.0);
  CHECK_THROWS_AS(sufficiency_accuracy({true}, {true, false}), ConfigError);
  CHECK_THROWS_AS(sufficiency_accuracy({}, {}), ConfigError);
}

TEST_CASE("enforce grounded keeps answers inside one doc") {
  const Doc d{0, entity_token(1), relation_token(2), entity_token(3)};
  const std::set<Token> inside{entity_token(1), entity_token(3)};
  CHECK(enforce_grounded(inside, {d}) == inside);
  const std::set<Token> single{relation_token(2)};
  CHECK(enforce_grounded(single, {d}) == single);
}

TEST_CASE("enforce grounded projects off-document answers to one entity") {
  const Doc d0{0, entity_token(1), relation_token(2), entity_token(3)};
  const Doc d1{1, entity_token(3), relation_token(4), entity_token(5)};
  // {e5, e9} is not inside any one doc; e5 has overlap 1, the rest 0.
  const std::set<Token> got =
      enforce_grounded({entity_token(5), entity_token(9)}, {d0, d1});
  CHECK(got == std::set<Token>{entity_token(5)});
}

TEST_CASE("enforce grounded breaks overlap ties on token order") {
  const Doc d0{0, entity_token(7), relation_token(1), entity_token(4)};
  // No entity overlaps {e9}; the first entity in token order (e4) wins.
  const std::set<Token> got = enforce_grounded({entity_token(9)}, {d0});
  CHECK(got == std::set<Token>{entity_token(4)});
}

TEST_CASE("enforce grounded spans two docs means off-document") {
  const Doc d0{0, entity_token(1), relation_token(2), entity_token(3)};
  const Doc d1{1, entity_token(4), relation_token(5), entity_token(6)};
  // {e1, e4} mixes two docs: not a subset of either, so it gets projected.
  const std::set<Token> got = enforce_grounded({entity_token(1), entity_token(4)}, {d0, d1});
  // Entities in token order: e1 first with overlap 1; e3 0; e4 1 but not
  // strictly greater, so e1 stays.
  CHECK(got == std::set<Token>{entity_token(1)});
}

TEST_CASE("enforce grounded needs a scratchpad") {
  CHECK_THROWS_AS(enforce_grounded({entity_token(1)}, {}), SequencingError);
}

TEST_CASE("pairwise inference picks the higher score") {
  CHECK(pairwise_infer("a", 0.9, "b", 0.2) == std::pair<bool, bool>{true, false});
  CHECK(pairwise_infer("a", 0.1, "b", 0.8) == std::pair<bool, bool>{false, true});
}

TEST_CASE("pairwise inference tie goes to the smaller id") {
  CHECK(pairwise_infer("q1a", 0.5, "q1u", 0.5) == std::pair<bool, bool>{true, false});
  CHECK(pairwise_infer("q1u", 0.5, "q1a", 0.5) == std::pair<bool, bool>{false, true});
}

TEST_CASE("pairwise inference rejects identical ids") {
  CHECK_THROWS_AS(pairwise_infer("x", 0.5, "x", 0.4), ConfigError);
}
