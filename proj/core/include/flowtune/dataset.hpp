// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowtune/rng.hpp"
#include "flowtune/types.hpp"

namespace flowtune {

// A document is a single three-token fact: subject --relation--> object.
struct Doc {
  DocId id = -1;
  Token subject;
  Token relation;
  Token object;

  auto operator<=>(const Doc&) const = default;

  std::vector<Token> tokens() const { return {subject, relation, object}; }
  bool contains(const Token& t) const {
    return t == subject || t == relation || t == object;
  }
};

// A multi-hop question: starting at `head`, follow `relations` in order.
struct Question {
  Token head;
  std::vector<Token> relations;  // r1..rk, hop count = relations.size()

  auto operator<=>(const Question&) const = default;

  std::vector<Token> tokens() const;
};

struct Instance {
  std::string id;
  std::string pair_id;  // shared by an answerable instance and its twin
  Question question;
  int hops = 0;
  std::vector<Doc> candidates;
  std::set<DocId> gold_support;            // ids of the gold chain docs
  std::vector<std::set<Token>> gold_answers;  // non-empty list of non-empty sets
  bool answerable = false;
};

struct GenConfig {
  int n_instances = 0;
  std::map<int, double> hop_mix;  // hop count -> probability, sums to 1
  int n_distractors_min = 4;
  int n_distractors_max = 6;
  int n_entities = 50;
  int n_relations = 12;
  FlowVariant variant = FlowVariant::Answerable;
};

// Generates a dataset. For the Full variant, n_instances must be even and the
// output holds n_instances/2 adjacent (answerable, unanswerable twin) pairs in
// seeded order. Deterministic in (config, seed).
std::vector<Instance> gen_dataset(const GenConfig& config, std::uint64_t seed);

// Copies the instance, removes one uniformly chosen gold doc from candidates,
// inserts a fresh distractor at its position, flips answerable, keeps pair_id.
Instance make_unanswerable_twin(const Instance& inst, Rng& rng);

// Largest subset whose per-hop-class frequency is within 1/|output| of
// target_dist, chosen uniformly at random within classes. Deterministic in
// (instances, target_dist, seed). Throws ConfigError when no non-empty subset
// is feasible.
std::vector<Instance> subsample_to_hops(const std::vector<Instance>& instances,
                                        const std::map<int, double>& target_dist,
                                        std::uint64_t seed);

// Structural validation of a single instance (duplicate ids, gold bookkeeping,
// answerable <=> full chain present). Throws MalformedInstanceError.
void validate_instance(const Instance& inst);

// JSON Lines round trip. The first line is a format header
// {"format":"flowdev-dataset","version":1}; each following line is one
// instance. Loaders reject unknown formats and malformed instances.
void save_dataset(const std::vector<Instance>& instances, const std::string& path);
std::vector<Instance> load_dataset(const std::string& path);

void write_dataset(const std::vector<Instance>& instances, std::ostream& out);
std::vector<Instance> read_dataset(std::istream& in);

}  // namespace flowtune
