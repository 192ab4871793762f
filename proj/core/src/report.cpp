// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/report.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "flowtune/types.hpp"

namespace flowtune {

namespace {

nlohmann::json parse_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw IoError("malformed metrics line: " + line);
  return j;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

RunReport summarize_run(const std::vector<std::string>& metrics_lines,
                        const std::vector<std::string>& rollout_lines) {
  RunReport report;
  for (const std::string& line : metrics_lines) {
    const nlohmann::json j = parse_line(line);
    report.episodes_seen = j.at("episodes_seen").get<std::uint64_t>();
    report.pv_answer_f1 = j.at("pv_answer_f1").get<double>();
    report.pv_support_f1 = j.at("pv_support_f1").get<double>();
    if (j.at("pv_suff_acc").is_null()) {
      report.pv_suff_acc.reset();
    } else {
      report.pv_suff_acc = j.at("pv_suff_acc").get<double>();
    }
    report.total_pairs += j.at("pairs").get<std::int64_t>();
    report.ref_updates += j.at("ref_updated").get<bool>() ? 1 : 0;
    report.rollouts_launched += j.at("rollouts_launched").get<std::int64_t>();
    report.rollout_invocations += j.at("rollout_invocations").get<std::int64_t>();
  }
  if (!rollout_lines.empty()) {
    const std::size_t take = std::min<std::size_t>(100, rollout_lines.size());
    std::size_t zero = 0;
    for (std::size_t i = 0; i < take; ++i) {
      const nlohmann::json j = parse_line(rollout_lines[i]);
      if (j.at("pairs_emitted").get<std::int64_t>() == 0) ++zero;
    }
    report.zero_pair_fraction_first_100 =
        static_cast<double>(zero) / static_cast<double>(take);
  }
  return report;
}

std::string render_report(const RunReport& report) {
  std::string out;
  out += "episodes_seen=" + std::to_string(report.episodes_seen) + "\n";
  out += "pv_answer_f1=" + fmt(report.pv_answer_f1) + "\n";
  out += "pv_support_f1=" + fmt(report.pv_support_f1) + "\n";
  out += "pv_suff_acc=" +
         (report.pv_suff_acc ? fmt(*report.pv_suff_acc) : std::string("n/a")) + "\n";
  out += "total_pairs=" + std::to_string(report.total_pairs) + "\n";
  out += "ref_updates=" + std::to_string(report.ref_updates) + "\n";
  out += "rollouts_launched=" + std::to_string(report.rollouts_launched) + "\n";
  out += "rollout_invocations=" + std::to_string(report.rollout_invocations) + "\n";
  if (report.zero_pair_fraction_first_100) {
    out += "zero_pair_fraction_first_100=" + fmt(*report.zero_pair_fraction_first_100) + "\n";
  }
  return out;
}

std::string render_csv(const std::vector<std::string>& metrics_lines) {
  std::string out =
      "episodes_seen,pv_answer_f1,pv_support_f1,pv_suff_acc,pairs,dpo_loss_mean,"
      "sup_loss_mean,ref_updated,rollouts_launched,rollout_invocations\n";
  for (const std::string& line : metrics_lines) {
    const nlohmann::json j = parse_line(line);
    out += std::to_string(j.at("episodes_seen").get<std::uint64_t>());
    out += ',' + fmt(j.at("pv_answer_f1").get<double>());
    out += ',' + fmt(j.at("pv_support_f1").get<double>());
    out += ',';
    if (!j.at("pv_suff_acc").is_null()) out += fmt(j.at("pv_suff_acc").get<double>());
    out += ',' + std::to_string(j.at("pairs").get<std::int64_t>());
    out += ',' + fmt(j.at("dpo_loss_mean").get<double>());
    out += ',' + fmt(j.at("sup_loss_mean").get<double>());
    out += ',' + std::string(j.at("ref_updated").get<bool>() ? "1" : "0");
    out += ',' + std::to_string(j.at("rollouts_launched").get<std::int64_t>());
    out += ',' + std::to_string(j.at("rollout_invocations").get<std::int64_t>());
    out += '\n';
  }
  return out;
}

}  // namespace flowtune
