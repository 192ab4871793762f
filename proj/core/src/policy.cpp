// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowtune {

CocobState CocobState::init(const std::vector<double>& w1, double alpha, double epsilon) {
  if (alpha <= 0.0 || epsilon <= 0.0) throw ConfigError("cocob: alpha and epsilon must be > 0");
  CocobState s;
  s.w1 = w1;
  s.theta.assign(w1.size(), 0.0);
  s.grad_abs_sum.assign(w1.size(), 0.0);
  s.grad_abs_max.assign(w1.size(), epsilon);
  s.reward.assign(w1.size(), 0.0);
  s.alpha = alpha;
  s.epsilon = epsilon;
  return s;
}

namespace {

NodePolicy make_policy(NodeRole role, std::vector<double> weights) {
  NodePolicy p;
  p.role = role;
  p.ref_weights = weights;
  p.opt = CocobState::init(weights);
  p.weights = std::move(weights);
  return p;
}

}  // namespace

PolicySet zero_policies() {
  PolicySet set;
  for (int i = 0; i < kNumRoles; ++i) {
    set.policies[static_cast<std::size_t>(i)] = make_policy(
        static_cast<NodeRole>(i), std::vector<double>(FeatureMap::dimension(), 0.0));
  }
  return set;
}

PolicySet prior_policies() {
  std::vector<double> w(FeatureMap::dimension(), 0.0);
  auto set_w = [&w](Feature f, double v) { w[static_cast<std::size_t>(f)] = v; };
  set_w(Feature::QgEntityIsFrontier, 0.6);
  set_w(Feature::QgRelationIsNext, 0.6);
  set_w(Feature::QgHeadFresh, 0.3);
  set_w(Feature::QgFrontierNext, 0.3);
  set_w(Feature::RtSubjectMatches, 0.4);
  set_w(Feature::RtRelationMatches, 0.4);
  set_w(Feature::RtExactMatch, 0.6);
  set_w(Feature::SrStopChainComplete, 0.8);
  set_w(Feature::SrContinueChainIncomplete, 0.8);
  // Answer-stage and sufficiency weights start at zero: the prior only needs
  // to make retrieval competent enough that deviations produce comparable
  // outcomes downstream.
  PolicySet set;
  for (int i = 0; i < kNumRoles; ++i) {
    set.policies[static_cast<std::size_t>(i)] = make_policy(static_cast<NodeRole>(i), w);
  }
  return set;
}

std::vector<double> action_logits(const std::vector<double>& weights, const FeatureMap& fmap,
                                  const Observation& obs, const ActionSet& actions) {
  if (static_cast<int>(weights.size()) != FeatureMap::dimension()) {
    throw ConfigError("policy weight dimension mismatch");
  }
  std::vector<double> logits;
  logits.reserve(actions.actions.size());
  for (const Action& a : actions.actions) {
    double z = 0.0;
    for (int idx : fmap.active(obs, a)) z += weights[static_cast<std::size_t>(idx)];
    logits.push_back(z);
  }
  return logits;
}

std::vector<double> log_probs(const std::vector<double>& weights, const FeatureMap& fmap,
                              const Observation& obs, const ActionSet& actions) {
  std::vector<double> out = action_logits(weights, fmap, obs, actions);
  if (out.empty()) throw SequencingError("log_probs over an empty action set");
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double z : out) sum += std::exp(z - mx);
  const double log_z = mx + std::log(sum);
  for (double& z : out) z -= log_z;
  return out;
}

double log_prob(const std::vector<double>& weights, const FeatureMap& fmap,
                const Observation& obs, const ActionSet& actions, int index) {
  if (index < 0 || index >= static_cast<int>(actions.actions.size())) {
    throw SequencingError("log_prob: action index out of range");
  }
  return log_probs(weights, fmap, obs, actions)[static_cast<std::size_t>(index)];
}

Selection select(const NodePolicy& policy, const FeatureMap& fmap, const Observation& obs,
                 const ActionSet& actions, Mode mode, Rng* rng) {
  const std::vector<double> lps = log_probs(policy.weights, fmap, obs, actions);
  Selection sel;
  if (mode == Mode::Greedy) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(lps.size()); ++i) {
      if (lps[static_cast<std::size_t>(i)] > lps[static_cast<std::size_t>(best)]) best = i;
    }
    sel.index = best;
  } else {
    if (rng == nullptr) throw ConfigError("sampled selection needs a generator");
    const double u = rng->real();
    double acc = 0.0;
    sel.index = static_cast<int>(lps.size()) - 1;  // guards rounding at acc ~= 1
    for (int i = 0; i < static_cast<int>(lps.size()); ++i) {
      acc += std::exp(lps[static_cast<std::size_t>(i)]);
      if (u < acc) {
        sel.index = i;
        break;
      }
    }
  }
  sel.log_prob = lps[static_cast<std::size_t>(sel.index)];
  return sel;
}

std::vector<int> alternatives(const NodePolicy& policy, const FeatureMap& fmap,
                              const Observation& obs, const ActionSet& actions,
                              int chosen_index, int k) {
  if (k < 0) throw ConfigError("alternatives: k must be >= 0");
  if (chosen_index < 0 || chosen_index >= static_cast<int>(actions.actions.size())) {
    throw SequencingError("alternatives: chosen index out of range");
  }
  const std::vector<double> logits = action_logits(policy.weights, fmap, obs, actions);
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
  });
  std::vector<int> out;
  for (int idx : order) {
    if (idx == chosen_index) continue;
    if (static_cast<int>(out.size()) == k) break;
    out.push_back(idx);
  }
  return out;
}

}  // namespace flowtune
