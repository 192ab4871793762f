// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flowtune/features.hpp"
#include "flowtune/flow.hpp"
#include "flowtune/rng.hpp"

namespace flowtune {

// Per-coordinate coin-betting optimizer state. The step updates, for each
// coordinate with gradient g:
//   L <- max(L, |g|); G <- G + |g|; R <- max(R - (w - w1) * g, 0);
//   theta <- theta - g;
//   w <- w1 + theta / (L * max(G + L, alpha * L)) * (L + R)
// There is no learning rate; the initial weights w1 act as the anchor.
struct CocobState {
  std::vector<double> w1;     // initial weights
  std::vector<double> theta;  // negative gradient sum
  std::vector<double> grad_abs_sum;  // G
  std::vector<double> grad_abs_max;  // L, initialized to epsilon > 0
  std::vector<double> reward;        // R, >= 0
  double alpha = 100.0;
  double epsilon = 1e-8;

  static CocobState init(const std::vector<double>& w1, double alpha = 100.0,
                         double epsilon = 1e-8);

  bool operator==(const CocobState&) const = default;
};

// Linear softmax policy for one node role: logits are dot products of the
// shared indicator features with this role's weight vector. ref_weights anchor
// the preference loss and move only through soft reference updates.
struct NodePolicy {
  NodeRole role = NodeRole::QueryGen;
  std::vector<double> weights;
  std::vector<double> ref_weights;
  CocobState opt;

  bool operator==(const NodePolicy&) const = default;
};

struct PolicySet {
  std::array<NodePolicy, kNumRoles> policies;

  NodePolicy& at(NodeRole role) { return policies[static_cast<std::size_t>(role)]; }
  const NodePolicy& at(NodeRole role) const {
    return policies[static_cast<std::size_t>(role)];
  }

  bool operator==(const PolicySet&) const = default;
};

// Fresh policies with all weights zero.
PolicySet zero_policies();

// Fresh policies with small hand-set weights on the obvious match features
// (query the chain frontier with the next uncovered relation, retrieve exact
// query matches, stop once the chain walk is complete). This puts the
// untrained flow in a rewarding region so one-step deviations produce
// comparable outcomes; answer-stage weights start at zero.
PolicySet prior_policies();

// Logits for every action in the set, under `weights` (callers pass either
// policy.weights or policy.ref_weights).
std::vector<double> action_logits(const std::vector<double>& weights,
                                  const FeatureMap& fmap, const Observation& obs,
                                  const ActionSet& actions);

// Log-softmax probability of actions[index]. Max-subtraction keeps the
// computation stable for large logits.
double log_prob(const std::vector<double>& weights, const FeatureMap& fmap,
                const Observation& obs, const ActionSet& actions, int index);

// All log-softmax probabilities at once.
std::vector<double> log_probs(const std::vector<double>& weights, const FeatureMap& fmap,
                              const Observation& obs, const ActionSet& actions);

struct Selection {
  int index = -1;
  double log_prob = 0.0;
};

// Greedy: argmax logit, ties to the lowest index. SeededSample: categorical
// draw from the softmax using the caller's generator.
Selection select(const NodePolicy& policy, const FeatureMap& fmap, const Observation& obs,
                 const ActionSet& actions, Mode mode, Rng* rng = nullptr);

// The k highest-logit action indices excluding chosen_index (fewer when the
// set is small), ordered by (logit desc, index asc). Stand-in for a diverse
// sampler: deterministic, distinct, never the chosen action.
std::vector<int> alternatives(const NodePolicy& policy, const FeatureMap& fmap,
                              const Observation& obs, const ActionSet& actions,
                              int chosen_index, int k);

}  // namespace flowtune
