// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowtune/metrics.hpp"
#include "flowtune/policy.hpp"

namespace flowtune {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Doc> scratchpad_docs(const Instance& inst, const ConversationState& state) {
  std::vector<Doc> docs;
  docs.reserve(state.scratchpad.size());
  for (DocId id : state.scratchpad) {
    for (const Doc& d : inst.candidates) {
      if (d.id == id) {
        docs.push_back(d);
        break;
      }
    }
  }
  return docs;
}

std::set<Token> concise_tokens(const Trace& trace) {
  const auto& ans = trace.final_state.concise_answer;
  if (!ans.has_value()) throw SequencingError("finished trace without a concise answer");
  return std::set<Token>(ans->begin(), ans->end());
}

// Answer F1 for progressive validation / evaluation, optionally projecting the
// concise answer onto the retrieved docs first.
double scored_answer_f1(const Instance& inst, const Trace& trace, bool grounded) {
  if (!grounded) return trace.outcome.answer_f1;
  const std::set<Token> projected =
      enforce_grounded(concise_tokens(trace), scratchpad_docs(inst, trace.final_state));
  return answer_f1(projected, inst.gold_answers);
}

bool grounded_in_one_doc(const std::set<Token>& answer, const std::vector<Doc>& docs) {
  for (const Doc& d : docs) {
    const std::vector<Token> toks = d.tokens();
    const std::set<Token> doc_tokens(toks.begin(), toks.end());
    bool subset = true;
    for (const Token& t : answer) {
      if (!doc_tokens.contains(t)) {
        subset = false;
        break;
      }
    }
    if (subset) return true;
  }
  return false;
}

// Probability assigned to the "sufficient" action (index 0) at the trace's
// Sufficiency invocation.
double sufficiency_score(const Trace& trace, const PolicySet& policies,
                         const FeatureMap& fmap) {
  for (const Invocation& inv : trace.invocations) {
    if (inv.role == NodeRole::Sufficiency) {
      const auto lps = log_probs(policies.at(NodeRole::Sufficiency).weights, fmap,
                                 inv.observation, inv.action_set);
      return std::exp(lps[0]);
    }
  }
  throw SequencingError("trace has no sufficiency invocation");
}

}  // namespace

std::string TrainConfig::canonical_text() const {
  std::string out;
  const auto kv = [&out](const char* key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  kv("variant", variant_name(flow.variant));
  kv("max_retrievals", std::to_string(flow.max_retrievals));
  kv("rollouts_k", std::to_string(rollouts_k));
  kv("minibatch", std::to_string(minibatch));
  kv("beta", fmt_double(dpo.beta));
  kv("tau", fmt_double(dpo.tau));
  kv("ref_update_period", std::to_string(dpo.ref_update_period));
  kv("gate_on_improvement", dpo.gate_on_improvement ? "1" : "0");
  kv("fixed_ref", dpo.fixed_ref ? "1" : "0");
  kv("seed", std::to_string(seed));
  kv("passes", std::to_string(passes));
  kv("max_episodes", std::to_string(max_episodes));
  kv("no_prior", no_prior ? "1" : "0");
  kv("disable_updates", disable_updates ? "1" : "0");
  kv("enforce_grounded", enforce_grounded ? "1" : "0");
  kv("pairwise_inference", pairwise_inference ? "1" : "0");
  return out;
}

TrainResult train(const std::vector<Instance>& instances, const TrainConfig& config,
                  const std::optional<Checkpoint>& start, const TrainHooks& hooks) {
  if (instances.empty()) throw ConfigError("train: empty dataset");
  if (config.minibatch < 1) throw ConfigError("train: minibatch must be >= 1");
  if (config.passes < 1) throw ConfigError("train: passes must be >= 1");
  if (config.dpo.ref_update_period < 1) {
    throw ConfigError("train: ref_update_period must be >= 1");
  }
  validate_for_flow(instances, config.flow);

  const std::uint64_t config_hash = fnv1a64(config.canonical_text());

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  if (start.has_value()) {
    ckpt = *start;
    if (ckpt.config_hash != config_hash) {
      std::fprintf(stderr,
                   "warning: resuming with a configuration that differs from the "
                   "checkpoint's (hash %016" PRIx64 " vs %016" PRIx64 ")\n",
                   config_hash, ckpt.config_hash);
    }
  } else {
    ckpt.policies = config.no_prior ? zero_policies() : prior_policies();
  }
  ckpt.flow = config.flow;
  ckpt.config_hash = config_hash;

  static const FeatureMap fmap;
  const auto n = static_cast<std::uint64_t>(instances.size());
  const std::uint64_t total = n * static_cast<std::uint64_t>(config.passes);
  const auto period = static_cast<std::uint64_t>(config.dpo.ref_update_period);
  std::uint64_t last_period_index = ckpt.episodes_seen / period;

  std::vector<PreferencePair> pair_buf;
  std::vector<SupervisedExample> sup_buf;
  std::int64_t batch_rollouts = 0;
  std::int64_t batch_invocations = 0;
  int batch_episodes = 0;

  const bool full = config.flow.variant == FlowVariant::Full;

  while (ckpt.episodes_seen < total &&
         (config.max_episodes < 0 ||
          ckpt.episodes_seen < static_cast<std::uint64_t>(config.max_episodes))) {
    const Instance& inst = instances[ckpt.episodes_seen % n];

    const Trace trace = run_episode(config.flow, ckpt.policies, inst, Mode::Greedy,
                                    config.seed);

    // Progressive validation records this episode before any update that
    // learns from it.
    ckpt.pv.answer_f1.record(scored_answer_f1(inst, trace, config.enforce_grounded));
    ckpt.pv.support_f1.record(trace.outcome.support_f1);
    if (full) {
      ckpt.pv.sufficiency.record(trace.outcome.sufficiency_correct.value() ? 1.0 : 0.0);
    }

    RolloutStats stats;
    stats.episode_id = inst.id;
    stats.trace_len = static_cast<int>(trace.invocations.size());
    if (!config.disable_updates) {
      stats = generate_preferences(config.flow, ckpt.policies, inst, trace,
                                   config.rollouts_k, pair_buf, sup_buf);
    }
    ckpt.pv.pairs_per_episode.record(static_cast<double>(stats.pairs_emitted));
    ++ckpt.episodes_seen;
    if (hooks.on_pv_record) hooks.on_pv_record(ckpt.episodes_seen);

    batch_rollouts += stats.rollouts_launched;
    batch_invocations += stats.rollout_node_invocations;
    ++batch_episodes;

    {
      ordered_json line;
      line["episode_id"] = stats.episode_id;
      line["rollouts_launched"] = stats.rollouts_launched;
      line["rollout_node_invocations"] = stats.rollout_node_invocations;
      line["pairs_emitted"] = stats.pairs_emitted;
      line["trace_len"] = stats.trace_len;
      result.rollout_lines.push_back(line.dump());
    }

    const bool stream_done =
        ckpt.episodes_seen == total ||
        (config.max_episodes >= 0 &&
         ckpt.episodes_seen == static_cast<std::uint64_t>(config.max_episodes));
    if (batch_episodes < config.minibatch && !stream_done) continue;

    MinibatchReport report;
    if (!config.disable_updates) {
      report = apply_minibatch(ckpt.policies, fmap, pair_buf, sup_buf, config.dpo);
      if (report.pair_count > 0) ckpt.pv.dpo_loss.record(report.dpo_loss_mean);
    }
    if (hooks.on_update) hooks.on_update(ckpt.episodes_seen);

    // Reference update opportunities open each time the episode count crosses
    // a period boundary. The high-water mark moves at every opportunity even
    // when the update itself is withheld.
    bool ref_updated = false;
    while (ckpt.episodes_seen / period > last_period_index) {
      ++last_period_index;
      const double current = ckpt.pv.answer_f1.mean();
      const bool open = !config.dpo.gate_on_improvement || !ckpt.gate_has_record ||
                        current > ckpt.gate_best;
      if (!config.disable_updates && !config.dpo.fixed_ref && open) {
        soft_ref_update(ckpt.policies, config.dpo.tau);
        ref_updated = true;
      }
      ckpt.gate_best = std::max(ckpt.gate_best, current);
      ckpt.gate_has_record = true;
    }

    ordered_json line;
    line["episodes_seen"] = ckpt.episodes_seen;
    line["pv_answer_f1"] = ckpt.pv.answer_f1.mean();
    line["pv_support_f1"] = ckpt.pv.support_f1.mean();
    if (full) {
      line["pv_suff_acc"] = ckpt.pv.sufficiency.mean();
    } else {
      line["pv_suff_acc"] = nullptr;
    }
    line["pairs"] = report.pair_count;
    line["dpo_loss_mean"] = report.dpo_loss_mean;
    line["sup_loss_mean"] = report.supervised_mean_loss;
    line["ref_updated"] = ref_updated;
    line["rollouts_launched"] = batch_rollouts;
    line["rollout_invocations"] = batch_invocations;
    result.metrics_lines.push_back(line.dump());

    pair_buf.clear();
    sup_buf.clear();
    batch_rollouts = 0;
    batch_invocations = 0;
    batch_episodes = 0;

    if (hooks.should_stop && hooks.should_stop()) {
      result.interrupted = true;
      break;
    }
  }

  return result;
}

EvalReport evaluate(const std::vector<Instance>& instances, const FlowSpec& flow,
                    const PolicySet& policies, const EvalFlags& flags,
                    const std::function<void(const Trace&)>& per_trace) {
  if (instances.empty()) throw ConfigError("evaluate: empty dataset");
  if (flags.pairwise && flow.variant != FlowVariant::Full) {
    throw ConfigError("pairwise inference needs the full variant");
  }
  validate_for_flow(instances, flow);

  static const FeatureMap fmap;
  EvalReport report;
  report.episodes = static_cast<std::int64_t>(instances.size());

  std::vector<double> suff_scores(instances.size(), 0.0);
  std::vector<bool> raw_correct(instances.size(), false);
  std::map<std::string, std::vector<std::size_t>> pair_members;

  double answer_sum = 0.0;
  double support_sum = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& inst = instances[i];
    const Trace trace = run_episode(flow, policies, inst, Mode::Greedy, 0);
    if (per_trace) per_trace(trace);

    const double av = scored_answer_f1(inst, trace, flags.enforce_grounded);
    report.answer_values.push_back(av);
    report.support_values.push_back(trace.outcome.support_f1);
    answer_sum += av;
    support_sum += trace.outcome.support_f1;

    if (!grounded_in_one_doc(concise_tokens(trace),
                             scratchpad_docs(inst, trace.final_state))) {
      ++report.off_document;
    }

    if (flow.variant == FlowVariant::Full) {
      raw_correct[i] = trace.outcome.sufficiency_correct.value();
      if (flags.pairwise) {
        if (inst.pair_id.empty()) {
          throw ConfigError("pairwise inference needs a pair_id on every instance");
        }
        suff_scores[i] = sufficiency_score(trace, policies, fmap);
        pair_members[inst.pair_id].push_back(i);
      }
    }
  }

  const auto count = static_cast<double>(instances.size());
  report.answer_f1_mean = answer_sum / count;
  report.support_f1_mean = support_sum / count;

  if (flow.variant == FlowVariant::Full) {
    if (flags.pairwise) {
      std::vector<bool> paired_correct(instances.size(), false);
      std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs;
      for (const auto& [pair_id, members] : pair_members) {
        if (members.size() != 2) {
          throw ConfigError("pair " + pair_id + " does not have exactly two members");
        }
      }
      // Decisions in dataset order of each pair's first member.
      std::set<std::string> emitted;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::string& pid = instances[i].pair_id;
        if (emitted.contains(pid)) continue;
        emitted.insert(pid);
        const auto& members = pair_members.at(pid);
        const std::size_t a = members[0];
        const std::size_t b = members[1];
        const auto [pred_a, pred_b] = pairwise_infer(instances[a].id, suff_scores[a],
                                                     instances[b].id, suff_scores[b]);
        paired_correct[a] = pred_a == instances[a].answerable;
        paired_correct[b] = pred_b == instances[b].answerable;
        PairDecision decision;
        decision.pair_id = pid;
        decision.id_a = instances[a].id;
        decision.id_b = instances[b].id;
        decision.score_a = suff_scores[a];
        decision.score_b = suff_scores[b];
        decision.pred_a = pred_a;
        decision.pred_b = pred_b;
        report.pairs.push_back(decision);
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < instances.size(); ++i) acc += paired_correct[i] ? 1.0 : 0.0;
      report.sufficiency_accuracy = acc / count;
    } else {
      double acc = 0.0;
      for (std::size_t i = 0; i < instances.size(); ++i) acc += raw_correct[i] ? 1.0 : 0.0;
      report.sufficiency_accuracy = acc / count;
    }
  }

  return report;
}

std::string EvalReport::to_json() const {
  ordered_json j;
  j["episodes"] = episodes;
  j["answer_f1_mean"] = answer_f1_mean;
  j["support_f1_mean"] = support_f1_mean;
  if (sufficiency_accuracy.has_value()) {
    j["sufficiency_accuracy"] = *sufficiency_accuracy;
  } else {
    j["sufficiency_accuracy"] = nullptr;
  }
  j["off_document"] = off_document;
  j["answer_values"] = answer_values;
  j["support_values"] = support_values;
  ordered_json pj = ordered_json::array();
  for (const PairDecision& p : pairs) {
    ordered_json e;
    e["pair_id"] = p.pair_id;
    e["id_a"] = p.id_a;
    e["id_b"] = p.id_b;
    e["score_a"] = p.score_a;
    e["score_b"] = p.score_b;
    e["pred_a"] = p.pred_a;
    e["pred_b"] = p.pred_b;
    pj.push_back(e);
  }
  j["pairs"] = pj;
  return j.dump();
}

}  // namespace flowtune
