// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flowtune/policy.hpp"
#include "flowtune/rollout.hpp"

namespace flowtune {

struct DpoConfig {
  double beta = 1.0;
  double tau = 0.1;             // soft reference mixing rate
  int ref_update_period = 200;  // episodes between reference update attempts
  bool gate_on_improvement = true;
  bool fixed_ref = false;       // never move the reference (beta 0.1 regime)
};

// Preference loss for one pair under the current and reference weights:
//   z = (logp_w - logp_w_ref) - (logp_l - logp_l_ref)
//   loss = -ln sigmoid(beta * z)
double dpo_loss(const NodePolicy& policy, const FeatureMap& fmap,
                const PreferencePair& pair, double beta);

// Analytic gradient of dpo_loss in policy.weights:
//   -beta * sigmoid(-beta * z) * (grad logp_w - grad logp_l)
// where grad logp_i = phi(obs, a_i) - E_softmax[phi]. Dense, one entry per
// feature dimension.
std::vector<double> dpo_grad(const NodePolicy& policy, const FeatureMap& fmap,
                             const PreferencePair& pair, double beta);

// Negative log-likelihood of the gold action and its gradient,
// E_softmax[phi] - phi(obs, gold), for the supervised terminal node.
double supervised_loss(const NodePolicy& policy, const FeatureMap& fmap,
                       const SupervisedExample& ex);
std::vector<double> supervised_grad(const NodePolicy& policy, const FeatureMap& fmap,
                                    const SupervisedExample& ex);

// One coin-betting update with gradient g. Updates state and weights in
// place; a zero gradient leaves both unchanged.
void cocob_step(CocobState& state, std::vector<double>& weights,
                const std::vector<double>& grad);

struct RoleUpdate {
  std::int64_t pair_count = 0;
  double mean_loss = 0.0;
  bool stepped = false;
};

struct MinibatchReport {
  std::array<RoleUpdate, kNumRoles> roles{};
  std::int64_t supervised_count = 0;
  double supervised_mean_loss = 0.0;
  std::int64_t pair_count = 0;
  double dpo_loss_mean = 0.0;  // over all pairs in the minibatch
};

// Applies one optimizer step per role: pairs grouped by role, gradients
// averaged, one cocob_step each; supervised examples likewise for
// ConciseAnswer. Contributions are canonically sorted and duplicate-merged
// first, so the update is invariant to the order pairs arrive in.
MinibatchReport apply_minibatch(PolicySet& policies, const FeatureMap& fmap,
                                const std::vector<PreferencePair>& pairs,
                                const std::vector<SupervisedExample>& supervised,
                                const DpoConfig& config);

// ref <- (1 - tau) * ref + tau * weights, for every role.
void soft_ref_update(PolicySet& policies, double tau);

}  // namespace flowtune
