// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: dataset generation, training, evaluation, exact
// per-instance oracles, hop-mix subsampling, and run reports.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowtune/checkpoint.hpp"
#include "flowtune/dataset.hpp"
#include "flowtune/oracle.hpp"
#include "flowtune/policy.hpp"
#include "flowtune/report.hpp"
#include "flowtune/train.hpp"
#include "flowtune/types.hpp"

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void handle_sigint(int) { g_interrupted = 1; }

std::map<int, double> parse_hop_mix(const std::string& text) {
  std::map<int, double> mix;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    const std::size_t colon = part.find(':');
    if (colon == std::string::npos) {
      throw flowtune::ConfigError("bad hop mix entry (want hops:prob): " + part);
    }
    mix[std::stoi(part.substr(0, colon))] = std::stod(part.substr(colon + 1));
    start = end + 1;
  }
  if (mix.empty()) throw flowtune::ConfigError("empty hop mix");
  return mix;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines,
                 bool append) {
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw flowtune::IoError("cannot open for writing: " + path);
  for (const std::string& line : lines) f << line << '\n';
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw flowtune::IoError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

int cmd_gen_data(const std::string& out, int n, const std::string& variant,
                 const std::string& hop_mix, int dmin, int dmax, int entities,
                 int relations, std::uint64_t seed) {
  flowtune::GenConfig config;
  config.n_instances = n;
  config.hop_mix = parse_hop_mix(hop_mix);
  config.n_distractors_min = dmin;
  config.n_distractors_max = dmax;
  config.n_entities = entities;
  config.n_relations = relations;
  config.variant = flowtune::variant_from_name(variant);
  const auto instances = flowtune::gen_dataset(config, seed);
  flowtune::save_dataset(instances, out);
  std::printf("wrote %zu instances to %s\n", instances.size(), out.c_str());
  return 0;
}

int cmd_subsample(const std::string& in, const std::string& out,
                  const std::string& hop_mix, std::uint64_t seed) {
  const auto instances = flowtune::load_dataset(in);
  const auto subset = flowtune::subsample_to_hops(instances, parse_hop_mix(hop_mix), seed);
  flowtune::save_dataset(subset, out);
  std::printf("kept %zu of %zu instances\n", subset.size(), instances.size());
  return 0;
}

int cmd_train(const flowtune::TrainConfig& config, const std::string& data,
              const std::string& out_dir, const std::string& resume) {
  const auto instances = flowtune::load_dataset(data);
  std::optional<flowtune::Checkpoint> start;
  if (!resume.empty()) start = flowtune::load_checkpoint(resume);

  std::filesystem::create_directories(out_dir);
  std::signal(SIGINT, handle_sigint);

  flowtune::TrainHooks hooks;
  hooks.should_stop = [] { return g_interrupted != 0; };

  const flowtune::TrainResult result = flowtune::train(instances, config, start, hooks);

  const bool append = start.has_value();
  write_lines(out_dir + "/metrics.jsonl", result.metrics_lines, append);
  write_lines(out_dir + "/rollout_stats.jsonl", result.rollout_lines, append);
  flowtune::save_checkpoint(result.checkpoint, out_dir + "/checkpoint.bin");

  const flowtune::RunReport report =
      flowtune::summarize_run(result.metrics_lines, result.rollout_lines);
  std::fputs(flowtune::render_report(report).c_str(), stdout);
  if (result.interrupted) {
    std::fprintf(stderr, "interrupted; checkpoint saved to %s/checkpoint.bin\n",
                 out_dir.c_str());
    return 130;
  }
  return 0;
}

int cmd_eval(const std::string& data, const std::string& checkpoint,
             const std::string& policies_kind, const std::string& variant,
             int max_retrievals, bool enforce, bool pairwise,
             const std::string& dump_dir, const std::string& out) {
  const auto instances = flowtune::load_dataset(data);

  flowtune::FlowSpec flow;
  flowtune::PolicySet policies;
  if (policies_kind == "checkpoint") {
    if (checkpoint.empty()) {
      throw flowtune::ConfigError("--checkpoint is required with --policies checkpoint");
    }
    const flowtune::Checkpoint ckpt = flowtune::load_checkpoint(checkpoint);
    flow = ckpt.flow;
    policies = ckpt.policies;
  } else {
    flow.variant = flowtune::variant_from_name(variant);
    flow.max_retrievals = max_retrievals;
    policies = policies_kind == "zero" ? flowtune::zero_policies()
                                       : flowtune::prior_policies();
  }

  std::function<void(const flowtune::Trace&)> per_trace;
  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    per_trace = [&dump_dir](const flowtune::Trace& trace) {
      std::ofstream f(dump_dir + "/" + trace.instance_id + ".jsonl", std::ios::trunc);
      f << flowtune::dump_trace(trace);
    };
  }

  flowtune::EvalFlags flags;
  flags.enforce_grounded = enforce;
  flags.pairwise = pairwise;
  const flowtune::EvalReport report = flowtune::evaluate(instances, flow, policies,
                                                         flags, per_trace);

  std::printf("episodes=%lld\n", static_cast<long long>(report.episodes));
  std::printf("answer_f1_mean=%.6f\n", report.answer_f1_mean);
  std::printf("support_f1_mean=%.6f\n", report.support_f1_mean);
  if (report.sufficiency_accuracy) {
    std::printf("sufficiency_accuracy=%.6f\n", *report.sufficiency_accuracy);
  }
  std::printf("off_document=%lld\n", static_cast<long long>(report.off_document));
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw flowtune::IoError("cannot open for writing: " + out);
    f << report.to_json() << '\n';
  }
  return 0;
}

int cmd_oracle(const std::string& data, int max_retrievals, std::int64_t limit,
               const std::string& out) {
  const auto instances = flowtune::load_dataset(data);
  flowtune::FlowSpec flow;
  flow.max_retrievals = max_retrievals;
  double answer_sum = 0.0;
  double support_sum = 0.0;
  for (const auto& inst : instances) {
    const flowtune::OracleResult best = flowtune::oracle_best(inst, flow, limit);
    answer_sum += best.best_answer_f1;
    support_sum += best.best_support_f1;
  }
  const auto n = static_cast<double>(instances.size());
  std::printf("instances=%zu\n", instances.size());
  std::printf("mean_best_answer_f1=%.6f\n", answer_sum / n);
  std::printf("mean_best_support_f1=%.6f\n", support_sum / n);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    f << "{\"instances\":" << instances.size() << ",\"mean_best_answer_f1\":"
      << answer_sum / n << ",\"mean_best_support_f1\":" << support_sum / n << "}\n";
  }
  return 0;
}

int cmd_report(const std::string& metrics, const std::string& rollout_stats,
               const std::string& csv) {
  const auto metric_lines = read_lines(metrics);
  std::vector<std::string> rollout_lines;
  if (!rollout_stats.empty()) rollout_lines = read_lines(rollout_stats);
  const flowtune::RunReport report = flowtune::summarize_run(metric_lines, rollout_lines);
  std::fputs(flowtune::render_report(report).c_str(), stdout);
  if (!csv.empty()) {
    std::ofstream f(csv, std::ios::trunc);
    if (!f) throw flowtune::IoError("cannot open for writing: " + csv);
    f << flowtune::render_csv(metric_lines);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow tuning toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-hop dataset");
  std::string gen_out, gen_variant = "answerable", gen_mix = "2:0.5,3:0.3,4:0.2";
  int gen_n = 1000, gen_dmin = 4, gen_dmax = 6, gen_entities = 50, gen_relations = 12;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--n", gen_n, "number of instances");
  gen->add_option("--variant", gen_variant, "answerable or full");
  gen->add_option("--hop-mix", gen_mix, "hop distribution, e.g. 2:0.5,3:0.5");
  gen->add_option("--distractors-min", gen_dmin, "min distractors per instance");
  gen->add_option("--distractors-max", gen_dmax, "max distractors per instance");
  gen->add_option("--entities", gen_entities, "entity vocabulary size");
  gen->add_option("--relations", gen_relations, "relation vocabulary size");
  gen->add_option("--seed", gen_seed, "generator seed");

  // subsample
  auto* sub = app.add_subcommand("subsample", "subsample a dataset to a hop mix");
  std::string sub_in, sub_out, sub_mix;
  std::uint64_t sub_seed = 0;
  sub->add_option("--in", sub_in, "input JSONL path")->required();
  sub->add_option("--out", sub_out, "output JSONL path")->required();
  sub->add_option("--hop-mix", sub_mix, "target hop distribution")->required();
  sub->add_option("--seed", sub_seed, "sampling seed");

  // train
  auto* tr = app.add_subcommand("train", "online training with one-step deviations");
  std::string tr_data, tr_out_dir, tr_resume, tr_variant = "answerable";
  flowtune::TrainConfig config;
  bool tr_no_gate = false;
  tr->add_option("--data", tr_data, "dataset JSONL path")->required();
  tr->add_option("--out-dir", tr_out_dir, "output directory")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--variant", tr_variant, "answerable or full");
  tr->add_option("--max-retrievals", config.flow.max_retrievals, "retrieval loop cap");
  tr->add_option("--rollouts-k", config.rollouts_k, "alternatives per position");
  tr->add_option("--minibatch", config.minibatch, "episodes per update");
  auto* beta_opt = tr->add_option("--beta", config.dpo.beta, "preference loss scale");
  tr->add_option("--tau", config.dpo.tau, "soft reference update rate");
  tr->add_option("--ref-period", config.dpo.ref_update_period,
                 "episodes between reference update opportunities");
  tr->add_flag("--no-gate", tr_no_gate, "always take reference updates");
  tr->add_flag("--fixed-ref", config.dpo.fixed_ref,
               "never move the reference (beta defaults to 0.1)");
  tr->add_option("--seed", config.seed, "run seed");
  tr->add_option("--passes", config.passes, "passes over the dataset");
  tr->add_option("--max-episodes", config.max_episodes, "episode budget (-1: unbounded)");
  tr->add_flag("--no-prior", config.no_prior, "start from all-zero weights");
  tr->add_flag("--disable-updates", config.disable_updates, "stream and record PV only");
  tr->add_flag("--enforce-grounded", config.enforce_grounded,
               "project concise answers onto retrieved docs in PV scoring");

  // eval
  auto* ev = app.add_subcommand("eval", "frozen-policy evaluation");
  std::string ev_data, ev_ckpt, ev_policies = "checkpoint", ev_variant = "answerable";
  std::string ev_dump, ev_out;
  int ev_cap = 4;
  bool ev_enforce = false, ev_pairwise = false;
  ev->add_option("--data", ev_data, "dataset JSONL path")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path");
  ev->add_option("--policies", ev_policies, "checkpoint, prior, or zero");
  ev->add_option("--variant", ev_variant, "flow variant for prior/zero policies");
  ev->add_option("--max-retrievals", ev_cap, "retrieval cap for prior/zero policies");
  ev->add_flag("--enforce-grounded", ev_enforce, "project concise answers before scoring");
  ev->add_flag("--pairwise", ev_pairwise, "paired sufficiency inference");
  ev->add_option("--dump-traces", ev_dump, "directory for per-episode trace dumps");
  ev->add_option("--out", ev_out, "write the full report as JSON");

  // oracle
  auto* orc = app.add_subcommand("oracle", "exact per-instance metric maxima");
  std::string orc_data, orc_out;
  int orc_cap = 4;
  std::int64_t orc_limit = 10'000'000;
  orc->add_option("--data", orc_data, "dataset JSONL path")->required();
  orc->add_option("--max-retrievals", orc_cap, "retrieval loop cap");
  orc->add_option("--limit", orc_limit, "combination budget per instance");
  orc->add_option("--out", orc_out, "write summary JSON");

  // report
  auto* rep = app.add_subcommand("report", "summarize a training run's logs");
  std::string rep_metrics, rep_rollouts, rep_csv;
  rep->add_option("--metrics", rep_metrics, "metrics.jsonl path")->required();
  rep->add_option("--rollout-stats", rep_rollouts, "rollout_stats.jsonl path");
  rep->add_option("--csv", rep_csv, "write the metrics log as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_out, gen_n, gen_variant, gen_mix, gen_dmin, gen_dmax,
                          gen_entities, gen_relations, gen_seed);
    }
    if (sub->parsed()) return cmd_subsample(sub_in, sub_out, sub_mix, sub_seed);
    if (tr->parsed()) {
      config.flow.variant = flowtune::variant_from_name(tr_variant);
      config.dpo.gate_on_improvement = !tr_no_gate;
      if (config.dpo.fixed_ref && beta_opt->count() == 0) config.dpo.beta = 0.1;
      return cmd_train(config, tr_data, tr_out_dir, tr_resume);
    }
    if (ev->parsed()) {
      return cmd_eval(ev_data, ev_ckpt, ev_policies, ev_variant, ev_cap, ev_enforce,
                      ev_pairwise, ev_dump, ev_out);
    }
    if (orc->parsed()) return cmd_oracle(orc_data, orc_cap, orc_limit, orc_out);
    if (rep->parsed()) return cmd_report(rep_metrics, rep_rollouts, rep_csv);
  } catch (const flowtune::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
