// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: episode execution, one-step-deviation
// preference generation (quadratic in trace length), minibatch updates, and
// dataset generation.

#include <benchmark/benchmark.h>

#include <vector>

#include "flowtune/dataset.hpp"
#include "flowtune/features.hpp"
#include "flowtune/flow.hpp"
#include "flowtune/optim.hpp"
#include "flowtune/oracle.hpp"
#include "flowtune/policy.hpp"
#include "flowtune/rollout.hpp"

namespace {

using namespace flowtune;

std::vector<Instance> hop_dataset(int hops, int n = 32) {
  GenConfig config;
  config.n_instances = n;
  config.hop_mix = {{hops, 1.0}};
  return gen_dataset(config, 1234 + static_cast<std::uint64_t>(hops));
}

void BM_RunEpisode(benchmark::State& state) {
  const int hops = static_cast<int>(state.range(0));
  const std::vector<Instance> data = hop_dataset(hops);
  const PolicySet policies = prior_policies();
  const FlowSpec flow;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_episode(flow, policies, data[i % data.size()]));
    ++i;
  }
}
BENCHMARK(BM_RunEpisode)->Arg(2)->Arg(3)->Arg(4);

void BM_GeneratePreferences(benchmark::State& state) {
  const int hops = static_cast<int>(state.range(0));
  const std::vector<Instance> data = hop_dataset(hops);
  const PolicySet policies = prior_policies();
  const FlowSpec flow;
  std::vector<Trace> traces;
  traces.reserve(data.size());
  for (const Instance& inst : data) traces.push_back(run_episode(flow, policies, inst));
  std::size_t i = 0;
  for (auto _ : state) {
    std::vector<PreferencePair> pairs;
    std::vector<SupervisedExample> supervised;
    const std::size_t at = i % data.size();
    benchmark::DoNotOptimize(
        generate_preferences(flow, policies, data[at], traces[at], 1, pairs, supervised));
    ++i;
  }
}
BENCHMARK(BM_GeneratePreferences)->Arg(2)->Arg(3)->Arg(4);

void BM_ApplyMinibatch(benchmark::State& state) {
  const std::vector<Instance> data = hop_dataset(3, 8);
  const FlowSpec flow;
  const FeatureMap fmap;
  std::vector<PreferencePair> pairs;
  std::vector<SupervisedExample> supervised;
  {
    const PolicySet frozen = prior_policies();
    for (const Instance& inst : data) {
      const Trace trace = run_episode(flow, frozen, inst);
      generate_preferences(flow, frozen, inst, trace, 1, pairs, supervised);
    }
  }
  for (auto _ : state) {
    PolicySet policies = prior_policies();
    benchmark::DoNotOptimize(
        apply_minibatch(policies, fmap, pairs, supervised, DpoConfig{}));
  }
  state.counters["pairs"] = static_cast<double>(pairs.size());
}
BENCHMARK(BM_ApplyMinibatch);

void BM_CocobStep(benchmark::State& state) {
  const int dim = FeatureMap::dimension();
  CocobState opt = CocobState::init(std::vector<double>(dim, 0.0));
  std::vector<double> weights(dim, 0.0);
  std::vector<double> grad(dim);
  for (int i = 0; i < dim; ++i) grad[static_cast<std::size_t>(i)] = (i % 2 ? 1.0 : -0.5);
  for (auto _ : state) {
    cocob_step(opt, weights, grad);
    benchmark::DoNotOptimize(weights.data());
  }
}
BENCHMARK(BM_CocobStep);

void BM_OracleBest(benchmark::State& state) {
  const int hops = static_cast<int>(state.range(0));
  const std::vector<Instance> data = hop_dataset(hops, 8);
  const FlowSpec flow;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle_best(data[i % data.size()], flow));
    ++i;
  }
}
BENCHMARK(BM_OracleBest)->Arg(2)->Arg(4);

void BM_GenDataset(benchmark::State& state) {
  GenConfig config;
  config.n_instances = 100;
  config.hop_mix = {{2, 0.5}, {3, 0.3}, {4, 0.2}};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_dataset(config, ++seed));
  }
}
BENCHMARK(BM_GenDataset);

}  // namespace

BENCHMARK_MAIN();
