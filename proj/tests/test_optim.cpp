// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstddef>
#include <vector>

#include "flowtune/dataset.hpp"
#include "flowtune/flow.hpp"
#include "flowtune/optim.hpp"
#include "flowtune/policy.hpp"
#include "flowtune/rng.hpp"
#include "flowtune/rollout.hpp"

using namespace flowtune;

namespace {

// Two-candidate retrieve decision: doc 1 matches the last query exactly,
// doc 0 not at all, so one weight on the exact-match feature controls the
// logit gap between the two actions.
PreferencePair gap_pair() {
  PreferencePair pair;
  pair.role = NodeRole::Retrieve;
  pair.position = 1;
  pair.observation.role = NodeRole::Retrieve;
  pair.observation.last_query = QueryAction{entity_token(1), relation_token(1)};
  pair.observation.candidates = {
      Doc{0, entity_token(8), relation_token(9), entity_token(7)},
      Doc{1, entity_token(1), relation_token(1), entity_token(2)}};
  pair.action_set.role = NodeRole::Retrieve;
  pair.action_set.actions = {RetrieveAction{0}, RetrieveAction{1}};
  pair.winner_index = 1;
  pair.loser_index = 0;
  pair.margin = 0.5;
  return pair;
}

NodePolicy retrieve_policy(double exact_match_weight) {
  NodePolicy policy;
  policy.role = NodeRole::Retrieve;
  policy.weights.assign(FeatureMap::dimension(), 0.0);
  policy.weights[static_cast<std::size_t>(Feature::RtExactMatch)] = exact_match_weight;
  policy.ref_weights.assign(FeatureMap::dimension(), 0.0);
  return policy;
}

std::vector<double> random_weights(Rng& rng) {
  std::vector<double> w(FeatureMap::dimension());
  for (double& x : w) x = 2.0 * rng.real() - 1.0;
  return w;
}

// Max relative error between an analytic gradient and a central difference,
// normalized by the analytic sup norm.
double fd_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double scale = 1e-12;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(fd[i] - analytic[i]) / scale);
  }
  return worst;
}

// Pairs and supervised examples harvested from a few episodes, for tests that
// want realistic minibatch contents.
struct Harvest {
  std::vector<PreferencePair> pairs;
  std::vector<SupervisedExample> supervised;
};

Harvest harvest_minibatch() {
  GenConfig config;
  config.n_instances = 8;
  config.variant = FlowVariant::Full;
  config.hop_mix = {{2, 0.6}, {3, 0.4}};
  const std::vector<Instance> instances = gen_dataset(config, 11);
  FlowSpec flow;
  flow.variant = FlowVariant::Full;
  const PolicySet policies = prior_policies();
  Harvest out;
  for (const Instance& inst : instances) {
    const Trace trace = run_episode(flow, policies, inst);
    generate_preferences(flow, policies, inst, trace, 2, out.pairs, out.supervised);
  }
  return out;
}

}  // namespace

TEST_CASE("identical current and reference weights give ln 2 loss") {
  NodePolicy policy = retrieve_policy(0.7);
  policy.ref_weights = policy.weights;
  // z is exactly zero when both log-probabilities come from the same weights.
  CHECK(dpo_loss(policy, FeatureMap(), gap_pair(), 1.0) == 0.6931471805599453);
  CHECK(dpo_loss(policy, FeatureMap(), gap_pair(), 0.25) == 0.6931471805599453);
}

TEST_CASE("a two-logit gap against a flat reference hits the sigmoid value") {
  const FeatureMap fmap;
  // Gap 2 with beta 1 and gap 1 with beta 2 both give -ln sigmoid(2).
  CHECK(dpo_loss(retrieve_policy(2.0), fmap, gap_pair(), 1.0) ==
        doctest::Approx(0.12692801104297263).epsilon(1e-12));
  CHECK(dpo_loss(retrieve_policy(1.0), fmap, gap_pair(), 2.0) ==
        doctest::Approx(0.12692801104297263).epsilon(1e-12));
  // Preferring the unmatched doc flips the sign: -ln sigmoid(-2).
  PreferencePair flipped = gap_pair();
  flipped.winner_index = 0;
  flipped.loser_index = 1;
  CHECK(dpo_loss(retrieve_policy(2.0), fmap, flipped, 1.0) ==
        doctest::Approx(2.0 + 0.12692801104297263).epsilon(1e-12));
}

TEST_CASE("preference gradients match central differences") {
  const FeatureMap fmap;
  const Harvest h = harvest_minibatch();
  REQUIRE(h.pairs.size() >= 4);
  Rng rng(99);
  const double step = 1e-5;
  int checked = 0;
  for (std::size_t pi = 0; pi < h.pairs.size() && checked < 12; pi += 3, ++checked) {
    const PreferencePair& pair = h.pairs[pi];
    NodePolicy policy;
    policy.role = pair.role;
    policy.weights = random_weights(rng);
    policy.ref_weights = random_weights(rng);
    const double beta = 0.5 + rng.real();
    const std::vector<double> analytic = dpo_grad(policy, fmap, pair, beta);
    std::vector<double> fd(analytic.size(), 0.0);
    for (std::size_t d = 0; d < fd.size(); ++d) {
      const double keep = policy.weights[d];
      policy.weights[d] = keep + step;
      const double hi = dpo_loss(policy, fmap, pair, beta);
      policy.weights[d] = keep - step;
      const double lo = dpo_loss(policy, fmap, pair, beta);
      policy.weights[d] = keep;
      fd[d] = (hi - lo) / (2.0 * step);
    }
    CHECK(fd_rel_error(analytic, fd) < 1e-4);
  }
  CHECK(checked >= 4);
}

TEST_CASE("supervised gradients match central differences") {
  const FeatureMap fmap;
  const Harvest h = harvest_minibatch();
  REQUIRE(!h.supervised.empty());
  Rng rng(100);
  const double step = 1e-5;
  for (std::size_t si = 0; si < h.supervised.size() && si < 6; ++si) {
    const SupervisedExample& ex = h.supervised[si];
    NodePolicy policy;
    policy.role = NodeRole::ConciseAnswer;
    policy.weights = random_weights(rng);
    policy.ref_weights = policy.weights;
    const std::vector<double> analytic = supervised_grad(policy, fmap, ex);
    std::vector<double> fd(analytic.size(), 0.0);
    for (std::size_t d = 0; d < fd.size(); ++d) {
      const double keep = policy.weights[d];
      policy.weights[d] = keep + step;
      const double hi = supervised_loss(policy, fmap, ex);
      policy.weights[d] = keep - step;
      const double lo = supervised_loss(policy, fmap, ex);
      policy.weights[d] = keep;
      fd[d] = (hi - lo) / (2.0 * step);
    }
    CHECK(fd_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("malformed pair and example indices are rejected") {
  const FeatureMap fmap;
  const NodePolicy policy = retrieve_policy(0.0);

  PreferencePair same = gap_pair();
  same.loser_index = same.winner_index;
  CHECK_THROWS_AS(dpo_loss(policy, fmap, same, 1.0), ConfigError);

  PreferencePair out = gap_pair();
  out.winner_index = 2;
  CHECK_THROWS_AS(dpo_grad(policy, fmap, out, 1.0), ConfigError);

  PreferencePair negative = gap_pair();
  negative.loser_index = -1;
  CHECK_THROWS_AS(dpo_loss(policy, fmap, negative, 1.0), ConfigError);

  SupervisedExample ex;
  ex.observation = gap_pair().observation;
  ex.observation.role = NodeRole::ConciseAnswer;
  ex.action_set.role = NodeRole::ConciseAnswer;
  ex.action_set.actions = {ConciseAction{entity_token(1)}, ConciseAction{entity_token(2)}};
  ex.gold_index = 5;
  NodePolicy cpolicy;
  cpolicy.role = NodeRole::ConciseAnswer;
  cpolicy.weights.assign(FeatureMap::dimension(), 0.0);
  CHECK_THROWS_AS(supervised_loss(cpolicy, fmap, ex), ConfigError);
  CHECK_THROWS_AS(supervised_grad(cpolicy, fmap, ex), ConfigError);
  ex.gold_index = 0;
  CHECK(supervised_loss(cpolicy, fmap, ex) == doctest::Approx(0.6931471805599453));
}

TEST_CASE("minibatch updates ignore arrival order exactly") {
  const FeatureMap fmap;
  Harvest h = harvest_minibatch();
  REQUIRE(h.pairs.size() >= 8);
  REQUIRE(!h.supervised.empty());
  const DpoConfig config;

  PolicySet a = prior_policies();
  const MinibatchReport ra = apply_minibatch(a, fmap, h.pairs, h.supervised, config);

  Harvest shuffled = h;
  Rng rng(5);
  rng.shuffle(shuffled.pairs);
  rng.shuffle(shuffled.supervised);
  PolicySet b = prior_policies();
  const MinibatchReport rb =
      apply_minibatch(b, fmap, shuffled.pairs, shuffled.supervised, config);

  CHECK(a == b);  // bitwise: weights, references, optimizer state
  CHECK(ra.pair_count == rb.pair_count);
  CHECK(ra.dpo_loss_mean == rb.dpo_loss_mean);
  CHECK(ra.supervised_mean_loss == rb.supervised_mean_loss);
}

TEST_CASE("feeding every contribution twice changes nothing") {
  const FeatureMap fmap;
  const Harvest h = harvest_minibatch();
  const DpoConfig config;

  PolicySet once = prior_policies();
  apply_minibatch(once, fmap, h.pairs, h.supervised, config);

  Harvest doubled = h;
  doubled.pairs.insert(doubled.pairs.end(), h.pairs.begin(), h.pairs.end());
  doubled.supervised.insert(doubled.supervised.end(), h.supervised.begin(),
                            h.supervised.end());
  PolicySet twice = prior_policies();
  const MinibatchReport report =
      apply_minibatch(twice, fmap, doubled.pairs, doubled.supervised, config);

  CHECK(once == twice);
  CHECK(report.pair_count == static_cast<std::int64_t>(doubled.pairs.size()));
}

TEST_CASE("minibatch report reflects the pre-step losses") {
  const FeatureMap fmap;
  const Harvest h = harvest_minibatch();
  const DpoConfig config;
  PolicySet policies = prior_policies();

  // Reference losses computed at the incoming weights, before any step.
  double loss_sum = 0.0;
  for (const PreferencePair& pair : h.pairs) {
    loss_sum += dpo_loss(policies.at(pair.role), fmap, pair, config.beta);
  }
  double sup_sum = 0.0;
  for (const SupervisedExample& ex : h.supervised) {
    sup_sum += supervised_loss(policies.at(NodeRole::ConciseAnswer), fmap, ex);
  }

  const PolicySet before = policies;
  const MinibatchReport report =
      apply_minibatch(policies, fmap, h.pairs, h.supervised, config);

  CHECK(report.pair_count == static_cast<std::int64_t>(h.pairs.size()));
  CHECK(report.supervised_count == static_cast<std::int64_t>(h.supervised.size()));
  CHECK(report.dpo_loss_mean ==
        doctest::Approx(loss_sum / static_cast<double>(h.pairs.size())).epsilon(1e-12));
  CHECK(report.supervised_mean_loss ==
        doctest::Approx(sup_sum / static_cast<double>(h.supervised.size()))
            .epsilon(1e-12));

  std::int64_t role_sum = 0;
  for (int r = 0; r < kNumRoles; ++r) {
    const RoleUpdate& ru = report.roles[static_cast<std::size_t>(r)];
    role_sum += ru.pair_count;
    const bool moved = !(policies.policies[static_cast<std::size_t>(r)].weights ==
                         before.policies[static_cast<std::size_t>(r)].weights);
    if (ru.stepped) {
      CHECK(ru.pair_count > 0);
    } else if (static_cast<NodeRole>(r) != NodeRole::ConciseAnswer) {
      CHECK(!moved);
    }
    // Reference weights never move inside a minibatch.
    CHECK(policies.policies[static_cast<std::size_t>(r)].ref_weights ==
          before.policies[static_cast<std::size_t>(r)].ref_weights);
  }
  CHECK(role_sum == report.pair_count);
}

TEST_CASE("an empty minibatch is a no-op") {
  const FeatureMap fmap;
  PolicySet policies = prior_policies();
  const PolicySet before = policies;
  const MinibatchReport report = apply_minibatch(policies, fmap, {}, {}, DpoConfig{});
  CHECK(policies == before);
  CHECK(report.pair_count == 0);
  CHECK(report.supervised_count == 0);
  CHECK(report.dpo_loss_mean == 0.0);
}

TEST_CASE("preference pairs for the supervised terminal node are refused") {
  const FeatureMap fmap;
  PreferencePair bad = gap_pair();
  bad.role = NodeRole::ConciseAnswer;
  bad.observation.role = NodeRole::ConciseAnswer;
  bad.action_set.role = NodeRole::ConciseAnswer;
  PolicySet policies = prior_policies();
  CHECK_THROWS_AS(apply_minibatch(policies, fmap, {bad}, {}, DpoConfig{}), ConfigError);
}

TEST_CASE("soft reference updates mix toward the current weights") {
  PolicySet policies = prior_policies();
  Rng rng(3);
  for (auto& p : policies.policies) p.weights = random_weights(rng);
  const PolicySet before = policies;

  PolicySet frozen = policies;
  soft_ref_update(frozen, 0.0);
  for (int r = 0; r < kNumRoles; ++r) {
    CHECK(frozen.policies[static_cast<std::size_t>(r)].ref_weights ==
          before.policies[static_cast<std::size_t>(r)].ref_weights);
  }

  PolicySet snapped = policies;
  soft_ref_update(snapped, 1.0);
  for (int r = 0; r < kNumRoles; ++r) {
    CHECK(snapped.policies[static_cast<std::size_t>(r)].ref_weights ==
          snapped.policies[static_cast<std::size_t>(r)].weights);
  }

  PolicySet mixed = policies;
  soft_ref_update(mixed, 0.1);
  const auto& mp = mixed.at(NodeRole::QueryGen);
  const auto& bp = before.at(NodeRole::QueryGen);
  for (std::size_t d = 0; d < mp.ref_weights.size(); ++d) {
    CHECK(mp.ref_weights[d] ==
          doctest::Approx(0.9 * bp.ref_weights[d] + 0.1 * bp.weights[d])
              .epsilon(1e-15));
  }

  CHECK_THROWS_AS(soft_ref_update(policies, -0.1), ConfigError);
  CHECK_THROWS_AS(soft_ref_update(policies, 1.5), ConfigError);
}
