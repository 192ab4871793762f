// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/optim.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace flowtune {

namespace {

// -ln sigmoid(x), computed without overflow on either tail.
double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double pair_logit(const NodePolicy& policy, const FeatureMap& fmap,
                  const PreferencePair& pair) {
  const auto lp = log_probs(policy.weights, fmap, pair.observation, pair.action_set);
  const auto ref = log_probs(policy.ref_weights, fmap, pair.observation, pair.action_set);
  const auto w = static_cast<std::size_t>(pair.winner_index);
  const auto l = static_cast<std::size_t>(pair.loser_index);
  return (lp[w] - ref[w]) - (lp[l] - ref[l]);
}

// E_softmax[phi] under the policy's current weights, dense.
std::vector<double> expected_features(const NodePolicy& policy, const FeatureMap& fmap,
                                      const Observation& obs, const ActionSet& actions) {
  const auto lps = log_probs(policy.weights, fmap, obs, actions);
  std::vector<double> ex(policy.weights.size(), 0.0);
  for (std::size_t j = 0; j < actions.actions.size(); ++j) {
    const double p = std::exp(lps[j]);
    for (int idx : fmap.active(obs, actions.actions[j])) {
      ex[static_cast<std::size_t>(idx)] += p;
    }
  }
  return ex;
}

void check_indices(const PreferencePair& pair) {
  const int n = static_cast<int>(pair.action_set.actions.size());
  if (pair.winner_index < 0 || pair.winner_index >= n || pair.loser_index < 0 ||
      pair.loser_index >= n || pair.winner_index == pair.loser_index) {
    throw ConfigError("preference pair with bad action indices");
  }
}

void check_gold_index(const SupervisedExample& ex) {
  if (ex.gold_index < 0 ||
      ex.gold_index >= static_cast<int>(ex.action_set.actions.size())) {
    throw ConfigError("supervised example with a bad gold index");
  }
}

}  // namespace

double dpo_loss(const NodePolicy& policy, const FeatureMap& fmap,
                const PreferencePair& pair, double beta) {
  check_indices(pair);
  return neg_log_sigmoid(beta * pair_logit(policy, fmap, pair));
}

std::vector<double> dpo_grad(const NodePolicy& policy, const FeatureMap& fmap,
                             const PreferencePair& pair, double beta) {
  check_indices(pair);
  const double z = pair_logit(policy, fmap, pair);
  const double coef = -beta * sigmoid(-beta * z);

  // grad logp_i = phi_i - E[phi]; the reference terms are constant in the
  // current weights and contribute nothing.
  const std::vector<double> ex = expected_features(policy, fmap, pair.observation,
                                                   pair.action_set);
  std::vector<double> grad_w(ex.size(), 0.0);
  std::vector<double> grad_l(ex.size(), 0.0);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    grad_w[i] = -ex[i];
    grad_l[i] = -ex[i];
  }
  const auto& aw = pair.action_set.actions[static_cast<std::size_t>(pair.winner_index)];
  const auto& al = pair.action_set.actions[static_cast<std::size_t>(pair.loser_index)];
  for (int idx : fmap.active(pair.observation, aw)) grad_w[static_cast<std::size_t>(idx)] += 1.0;
  for (int idx : fmap.active(pair.observation, al)) grad_l[static_cast<std::size_t>(idx)] += 1.0;

  std::vector<double> out(ex.size(), 0.0);
  for (std::size_t i = 0; i < ex.size(); ++i) out[i] = coef * (grad_w[i] - grad_l[i]);
  return out;
}

double supervised_loss(const NodePolicy& policy, const FeatureMap& fmap,
                       const SupervisedExample& ex) {
  check_gold_index(ex);
  return -log_prob(policy.weights, fmap, ex.observation, ex.action_set, ex.gold_index);
}

std::vector<double> supervised_grad(const NodePolicy& policy, const FeatureMap& fmap,
                                    const SupervisedExample& ex) {
  check_gold_index(ex);
  std::vector<double> out = expected_features(policy, fmap, ex.observation, ex.action_set);
  const auto& gold = ex.action_set.actions[static_cast<std::size_t>(ex.gold_index)];
  for (int idx : fmap.active(ex.observation, gold)) out[static_cast<std::size_t>(idx)] -= 1.0;
  return out;
}

void cocob_step(CocobState& state, std::vector<double>& weights,
                const std::vector<double>& grad) {
  const std::size_t d = weights.size();
  if (state.w1.size() != d || grad.size() != d) {
    throw ConfigError("cocob_step: dimension mismatch");
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double g = grad[i];
    state.grad_abs_max[i] = std::max(state.grad_abs_max[i], std::abs(g));
    state.grad_abs_sum[i] += std::abs(g);
    state.reward[i] = std::max(state.reward[i] - (weights[i] - state.w1[i]) * g, 0.0);
    state.theta[i] -= g;
    const double L = state.grad_abs_max[i];
    const double denom = L * std::max(state.grad_abs_sum[i] + L, state.alpha * L);
    weights[i] = state.w1[i] + state.theta[i] / denom * (L + state.reward[i]);
  }
}

namespace {

auto pair_order_key(const PreferencePair& p) {
  return std::tie(p.position, p.winner_index, p.loser_index, p.margin, p.observation,
                  p.action_set);
}

auto supervised_order_key(const SupervisedExample& e) {
  return std::tie(e.gold_index, e.observation, e.action_set);
}

}  // namespace

MinibatchReport apply_minibatch(PolicySet& policies, const FeatureMap& fmap,
                                const std::vector<PreferencePair>& pairs,
                                const std::vector<SupervisedExample>& supervised,
                                const DpoConfig& config) {
  MinibatchReport report;

  std::array<std::vector<const PreferencePair*>, kNumRoles> by_role;
  for (const PreferencePair& p : pairs) {
    if (p.role == NodeRole::ConciseAnswer) {
      throw ConfigError("the terminal node takes supervised updates, not preference pairs");
    }
    by_role[static_cast<std::size_t>(p.role)].push_back(&p);
  }

  double loss_sum_all = 0.0;
  for (int r = 0; r < kNumRoles; ++r) {
    auto& group = by_role[static_cast<std::size_t>(r)];
    RoleUpdate& ru = report.roles[static_cast<std::size_t>(r)];
    ru.pair_count = static_cast<std::int64_t>(group.size());
    if (group.empty()) continue;

    // Canonical order plus duplicate merging makes the accumulated mean
    // independent of arrival order.
    std::sort(group.begin(), group.end(), [](const PreferencePair* a, const PreferencePair* b) {
      return pair_order_key(*a) < pair_order_key(*b);
    });
    NodePolicy& policy = policies.at(static_cast<NodeRole>(r));
    std::vector<double> grad_sum(policy.weights.size(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < group.size();) {
      std::size_t j = i;
      while (j < group.size() && pair_order_key(*group[i]) == pair_order_key(*group[j])) ++j;
      const auto count = static_cast<double>(j - i);
      const std::vector<double> g = dpo_grad(policy, fmap, *group[i], config.beta);
      for (std::size_t c = 0; c < g.size(); ++c) grad_sum[c] += count * g[c];
      loss_sum += count * dpo_loss(policy, fmap, *group[i], config.beta);
      i = j;
    }
    const auto n = static_cast<double>(group.size());
    for (double& g : grad_sum) g /= n;
    cocob_step(policy.opt, policy.weights, grad_sum);
    ru.mean_loss = loss_sum / n;
    ru.stepped = true;
    loss_sum_all += loss_sum;
  }

  report.pair_count = static_cast<std::int64_t>(pairs.size());
  if (!pairs.empty()) {
    report.dpo_loss_mean = loss_sum_all / static_cast<double>(pairs.size());
  }

  if (!supervised.empty()) {
    std::vector<const SupervisedExample*> group;
    group.reserve(supervised.size());
    for (const SupervisedExample& e : supervised) group.push_back(&e);
    std::sort(group.begin(), group.end(),
              [](const SupervisedExample* a, const SupervisedExample* b) {
                return supervised_order_key(*a) < supervised_order_key(*b);
              });
    NodePolicy& policy = policies.at(NodeRole::ConciseAnswer);
    std::vector<double> grad_sum(policy.weights.size(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < group.size();) {
      std::size_t j = i;
      while (j < group.size() &&
             supervised_order_key(*group[i]) == supervised_order_key(*group[j])) {
        ++j;
      }
      const auto count = static_cast<double>(j - i);
      const std::vector<double> g = supervised_grad(policy, fmap, *group[i]);
      for (std::size_t c = 0; c < g.size(); ++c) grad_sum[c] += count * g[c];
      loss_sum += count * supervised_loss(policy, fmap, *group[i]);
      i = j;
    }
    const auto n = static_cast<double>(group.size());
    for (double& g : grad_sum) g /= n;
    cocob_step(policy.opt, policy.weights, grad_sum);
    report.supervised_count = static_cast<std::int64_t>(group.size());
    report.supervised_mean_loss = loss_sum / n;
  }

  return report;
}

void soft_ref_update(PolicySet& policies, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("soft_ref_update: tau must be in [0, 1]");
  for (auto& policy : policies.policies) {
    for (std::size_t i = 0; i < policy.ref_weights.size(); ++i) {
      policy.ref_weights[i] = (1.0 - tau) * policy.ref_weights[i] + tau * policy.weights[i];
    }
  }
}

}  // namespace flowtune
