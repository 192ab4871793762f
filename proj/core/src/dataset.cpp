// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

namespace flowtune {

using ordered_json = nlohmann::ordered_json;

std::vector<Token> Question::tokens() const {
  std::vector<Token> out;
  out.reserve(1 + relations.size());
  out.push_back(head);
  out.insert(out.end(), relations.begin(), relations.end());
  return out;
}

namespace {

constexpr int kDistractorTries = 1000;

int sample_hops(const std::map<int, double>& mix, Rng& rng) {
  const double r = rng.real();
  double acc = 0.0;
  int last = -1;
  for (const auto& [hops, p] : mix) {
    if (p < 0.0) throw ConfigError("gen_dataset: negative hop probability");
    acc += p;
    last = hops;
    if (r < acc) return hops;
  }
  if (last < 0) throw ConfigError("gen_dataset: empty hop mix");
  return last;  // guards accumulated rounding at acc ~= 1
}

std::vector<std::int32_t> sample_distinct(int count, int alphabet, Rng& rng) {
  if (count > alphabet) {
    throw ConfigError("gen_dataset: alphabet too small for a chain without repeats");
  }
  std::set<std::int32_t> seen;
  std::vector<std::int32_t> out;
  while (static_cast<int>(out.size()) < count) {
    auto v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(alphabet)));
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

struct Triple {
  Token s, r, o;
  auto operator<=>(const Triple&) const = default;
};

// A distractor shares at least one entity with the gold chain but never
// carries a (subject, relation) pair that some gold doc answers; otherwise the
// chain walk over observable state would become ambiguous and the instance
// unsolvable in principle.
Triple sample_distractor(const std::vector<Token>& chain_entities,
                         const std::set<std::pair<Token, Token>>& gold_signatures,
                         const std::set<Triple>& taken,
                         const std::vector<Token>& question_relations, int n_entities,
                         int n_relations, Rng& rng) {
  for (int attempt = 0; attempt < kDistractorTries; ++attempt) {
    const Token anchor = chain_entities[rng.below(chain_entities.size())];
    const bool anchor_is_subject = rng.below(2) == 0;
    const Token rel = rng.below(2) == 0
                          ? question_relations[rng.below(question_relations.size())]
                          : relation_token(static_cast<std::int32_t>(
                                rng.below(static_cast<std::uint64_t>(n_relations))));
    const Token other = entity_token(
        static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n_entities))));
    if (other == anchor) continue;
    const Triple t = anchor_is_subject ? Triple{anchor, rel, other}
                                       : Triple{other, rel, anchor};
    if (gold_signatures.count({t.s, t.r}) > 0) continue;
    if (taken.count(t) > 0) continue;
    return t;
  }
  throw ConfigError("gen_dataset: distractor sampling failed; infeasible config");
}

struct ChainParts {
  std::vector<Token> entities;   // e0..ek
  std::vector<Token> relations;  // r1..rk
  std::set<std::pair<Token, Token>> signatures;
};

Instance build_answerable(const GenConfig& cfg, const std::string& id,
                          const std::string& pair_id, int hops, Rng& rng) {
  ChainParts chain;
  for (auto e : sample_distinct(hops + 1, cfg.n_entities, rng)) {
    chain.entities.push_back(entity_token(e));
  }
  for (int i = 0; i < hops; ++i) {
    chain.relations.push_back(relation_token(
        static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(cfg.n_relations)))));
  }
  for (int i = 0; i < hops; ++i) {
    chain.signatures.insert({chain.entities[i], chain.relations[i]});
  }

  std::set<Triple> taken;
  std::vector<Triple> triples;
  for (int i = 0; i < hops; ++i) {
    Triple t{chain.entities[i], chain.relations[i], chain.entities[i + 1]};
    taken.insert(t);
    triples.push_back(t);
  }
  const int span = cfg.n_distractors_max - cfg.n_distractors_min;
  if (span < 0 || cfg.n_distractors_min < 0) {
    throw ConfigError("gen_dataset: bad distractor range");
  }
  const int n_distr =
      cfg.n_distractors_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(span + 1)));
  for (int i = 0; i < n_distr; ++i) {
    Triple t = sample_distractor(chain.entities, chain.signatures, taken, chain.relations,
                                 cfg.n_entities, cfg.n_relations, rng);
    taken.insert(t);
    triples.push_back(t);
  }

  // Ids carry no information about gold membership: assign a shuffled
  // permutation, then shuffle presentation order independently.
  std::vector<DocId> ids(triples.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<DocId>(i);
  rng.shuffle(ids);

  Instance inst;
  inst.id = id;
  inst.pair_id = pair_id;
  inst.question = Question{chain.entities.front(), chain.relations};
  inst.hops = hops;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    inst.candidates.push_back(Doc{ids[i], triples[i].s, triples[i].r, triples[i].o});
    if (static_cast<int>(i) < hops) inst.gold_support.insert(ids[i]);
  }
  rng.shuffle(inst.candidates);
  inst.gold_answers = {{chain.entities.back()}};
  inst.answerable = true;
  return inst;
}

}  // namespace

Instance make_unanswerable_twin(const Instance& inst, Rng& rng) {
  if (!inst.answerable) {
    throw MalformedInstanceError("make_unanswerable_twin: input must be answerable");
  }
  Instance twin = inst;
  twin.id = inst.id + "u";
  twin.answerable = false;

  std::vector<std::size_t> gold_positions;
  for (std::size_t i = 0; i < twin.candidates.size(); ++i) {
    if (twin.gold_support.count(twin.candidates[i].id) > 0) gold_positions.push_back(i);
  }
  if (gold_positions.empty()) {
    throw MalformedInstanceError("make_unanswerable_twin: no gold docs in candidates");
  }
  const std::size_t victim = gold_positions[rng.below(gold_positions.size())];

  std::vector<Token> chain_entities;
  chain_entities.push_back(inst.question.head);
  std::set<std::pair<Token, Token>> signatures;
  std::set<Triple> taken;
  int max_entity = 0, max_relation = 0;
  for (const Doc& d : inst.candidates) {
    taken.insert(Triple{d.subject, d.relation, d.object});
    max_entity = std::max({max_entity, d.subject.id, d.object.id});
    max_relation = std::max(max_relation, d.relation.id);
  }
  // Recover the chain from the gold docs: they form a path from the head.
  {
    Token cur = inst.question.head;
    for (const Token& rel : inst.question.relations) {
      signatures.insert({cur, rel});
      bool found = false;
      for (const Doc& d : inst.candidates) {
        if (inst.gold_support.count(d.id) > 0 && d.subject == cur && d.relation == rel) {
          cur = d.object;
          chain_entities.push_back(cur);
          found = true;
          break;
        }
      }
      if (!found) {
        throw MalformedInstanceError("make_unanswerable_twin: gold chain incomplete");
      }
    }
  }

  DocId fresh_id = 0;
  for (const Doc& d : inst.candidates) fresh_id = std::max(fresh_id, d.id);
  ++fresh_id;

  Triple t = sample_distractor(chain_entities, signatures, taken, inst.question.relations,
                               max_entity + 1, max_relation + 1, rng);
  twin.candidates[victim] = Doc{fresh_id, t.s, t.r, t.o};
  return twin;
}

std::vector<Instance> gen_dataset(const GenConfig& config, std::uint64_t seed) {
  if (config.n_instances <= 0) throw ConfigError("gen_dataset: n_instances must be > 0");
  double total = 0.0;
  for (const auto& [hops, p] : config.hop_mix) {
    if (hops < 1) throw ConfigError("gen_dataset: hop counts must be >= 1");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("gen_dataset: hop mix must sum to 1");
  }
  if (config.variant == FlowVariant::Full && config.n_instances % 2 != 0) {
    throw ConfigError("gen_dataset: Full variant needs an even n_instances");
  }

  Rng root(derive_seed(seed, 0x666c6f77ULL));
  std::vector<Instance> out;
  char buf[32];

  if (config.variant == FlowVariant::Answerable) {
    for (int i = 0; i < config.n_instances; ++i) {
      Rng rng = root.fork(static_cast<std::uint64_t>(i));
      const int hops = sample_hops(config.hop_mix, rng);
      std::snprintf(buf, sizeof(buf), "q%06d", i);
      out.push_back(build_answerable(config, buf, buf, hops, rng));
    }
    return out;
  }

  const int n_pairs = config.n_instances / 2;
  for (int i = 0; i < n_pairs; ++i) {
    Rng rng = root.fork(static_cast<std::uint64_t>(i));
    const int hops = sample_hops(config.hop_mix, rng);
    std::snprintf(buf, sizeof(buf), "q%06d", i);
    const std::string base = buf;
    Instance ans = build_answerable(config, base + "a", base, hops, rng);
    Instance twin = make_unanswerable_twin(ans, rng);
    twin.id = base + "u";
    if (rng.below(2) == 0) {
      out.push_back(std::move(ans));
      out.push_back(std::move(twin));
    } else {
      out.push_back(std::move(twin));
      out.push_back(std::move(ans));
    }
  }
  return out;
}

std::vector<Instance> subsample_to_hops(const std::vector<Instance>& instances,
                                        const std::map<int, double>& target_dist,
                                        std::uint64_t seed) {
  double total = 0.0;
  std::map<int, std::vector<std::size_t>> by_class;  // hop -> indices, dataset order
  for (const auto& [hops, p] : target_dist) {
    if (p < 0.0) throw ConfigError("subsample_to_hops: negative target probability");
    total += p;
    if (p > 0.0) by_class[hops];
  }
  if (std::abs(total - 1.0) > 1e-9 || by_class.empty()) {
    throw ConfigError("subsample_to_hops: target distribution must sum to 1");
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto it = by_class.find(instances[i].hops);
    if (it != by_class.end()) it->second.push_back(i);
  }

  // Largest m with floor(avail_h / p_h) >= m for every class, then a
  // largest-remainder apportionment of m over the classes. Both keep every
  // class within one instance of m * p_h, i.e. within 1/m in frequency.
  std::int64_t m = -1;
  for (const auto& [hops, p] : target_dist) {
    if (p <= 0.0) continue;
    const auto avail = static_cast<double>(by_class[hops].size());
    const auto cap = static_cast<std::int64_t>(std::floor(avail / p));
    m = m < 0 ? cap : std::min(m, cap);
  }
  std::map<int, std::int64_t> counts;
  for (; m > 0; --m) {
    counts.clear();
    std::int64_t assigned = 0;
    std::vector<std::pair<double, int>> remainders;  // (-frac, hop)
    for (const auto& [hops, p] : target_dist) {
      if (p <= 0.0) continue;
      const double exact = static_cast<double>(m) * p;
      const auto base = static_cast<std::int64_t>(std::floor(exact));
      counts[hops] = base;
      assigned += base;
      remainders.push_back({-(exact - static_cast<double>(base)), hops});
    }
    std::sort(remainders.begin(), remainders.end());
    bool ok = true;
    for (std::int64_t left = m - assigned; left > 0; --left) {
      bool placed = false;
      for (const auto& [negfrac, hops] : remainders) {
        if (counts[hops] < static_cast<std::int64_t>(by_class[hops].size())) {
          ++counts[hops];
          placed = true;
          break;
        }
      }
      if (!placed) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    bool fits = true;
    for (const auto& [hops, n] : counts) {
      if (n > static_cast<std::int64_t>(by_class[hops].size())) fits = false;
    }
    if (fits) break;
  }
  if (m <= 0) throw ConfigError("subsample_to_hops: no non-empty feasible subset");

  Rng rng(derive_seed(seed, 0x73756273ULL));
  std::vector<std::size_t> chosen;
  for (auto& [hops, indices] : by_class) {
    rng.shuffle(indices);
    for (std::int64_t i = 0; i < counts[hops]; ++i) chosen.push_back(indices[i]);
  }
  std::sort(chosen.begin(), chosen.end());  // keep dataset order
  std::vector<Instance> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(instances[i]);
  return out;
}

void validate_instance(const Instance& inst) {
  if (inst.id.empty()) throw MalformedInstanceError("instance with empty id");
  const std::string where = " (instance '" + inst.id + "')";
  if (inst.hops < 1 || inst.hops != static_cast<int>(inst.question.relations.size())) {
    throw MalformedInstanceError("hops does not match question relations" + where);
  }
  if (inst.candidates.empty()) throw MalformedInstanceError("no candidates" + where);
  std::set<DocId> ids;
  for (const Doc& d : inst.candidates) {
    if (!ids.insert(d.id).second) {
      throw MalformedInstanceError("duplicate candidate doc id" + where);
    }
  }
  if (inst.gold_support.empty()) throw MalformedInstanceError("empty gold support" + where);
  if (inst.gold_answers.empty()) throw MalformedInstanceError("no gold answers" + where);
  for (const auto& g : inst.gold_answers) {
    if (g.empty()) throw MalformedInstanceError("empty gold answer set" + where);
  }
  std::size_t present = 0;
  for (DocId id : inst.gold_support) present += ids.count(id);
  const std::size_t expected = inst.answerable ? inst.gold_support.size()
                                               : inst.gold_support.size() - 1;
  if (present != expected) {
    throw MalformedInstanceError(
        inst.answerable ? "answerable instance with missing gold docs" + where
                        : "unanswerable instance must miss exactly one gold doc" + where);
  }
}

namespace {

ordered_json doc_to_json(const Doc& d) {
  return ordered_json{{"id", d.id},
                      {"subject", to_string(d.subject)},
                      {"relation", to_string(d.relation)},
                      {"object", to_string(d.object)}};
}

ordered_json instance_to_json(const Instance& inst) {
  ordered_json q{{"head", to_string(inst.question.head)}, {"relations", ordered_json::array()}};
  for (const Token& r : inst.question.relations) q["relations"].push_back(to_string(r));
  ordered_json cands = ordered_json::array();
  for (const Doc& d : inst.candidates) cands.push_back(doc_to_json(d));
  ordered_json support = ordered_json::array();
  for (DocId id : inst.gold_support) support.push_back(id);
  ordered_json answers = ordered_json::array();
  for (const auto& gold : inst.gold_answers) {
    ordered_json set = ordered_json::array();
    for (const Token& t : gold) set.push_back(to_string(t));
    answers.push_back(set);
  }
  return ordered_json{{"id", inst.id},           {"pair_id", inst.pair_id},
                      {"question", q},           {"hops", inst.hops},
                      {"candidates", cands},     {"gold_support", support},
                      {"gold_answers", answers}, {"answerable", inst.answerable}};
}

Instance instance_from_json(const ordered_json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.pair_id = j.at("pair_id").get<std::string>();
  inst.question.head = parse_token(j.at("question").at("head").get<std::string>());
  for (const auto& r : j.at("question").at("relations")) {
    inst.question.relations.push_back(parse_token(r.get<std::string>()));
  }
  inst.hops = j.at("hops").get<int>();
  for (const auto& c : j.at("candidates")) {
    inst.candidates.push_back(Doc{c.at("id").get<DocId>(),
                                  parse_token(c.at("subject").get<std::string>()),
                                  parse_token(c.at("relation").get<std::string>()),
                                  parse_token(c.at("object").get<std::string>())});
  }
  for (const auto& id : j.at("gold_support")) inst.gold_support.insert(id.get<DocId>());
  for (const auto& gold : j.at("gold_answers")) {
    std::set<Token> set;
    for (const auto& t : gold) set.insert(parse_token(t.get<std::string>()));
    inst.gold_answers.push_back(std::move(set));
  }
  inst.answerable = j.at("answerable").get<bool>();
  return inst;
}

}  // namespace

void write_dataset(const std::vector<Instance>& instances, std::ostream& out) {
  out << ordered_json{{"format", "flowdev-dataset"}, {"version", 1}}.dump() << '\n';
  for (const Instance& inst : instances) {
    out << instance_to_json(inst).dump() << '\n';
  }
}

std::vector<Instance> read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset: missing header line");
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw IoError(std::string("dataset: bad header: ") + e.what());
  }
  if (header.value("format", "") != "flowdev-dataset") {
    throw IoError("dataset: unknown format");
  }
  if (header.value("version", -1) != 1) throw IoError("dataset: unsupported version");

  std::vector<Instance> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Instance inst;
    try {
      inst = instance_from_json(ordered_json::parse(line));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    validate_instance(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

void save_dataset(const std::vector<Instance>& instances, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_dataset(instances, f);
  if (!f.good()) throw IoError("write failed: " + path);
}

std::vector<Instance> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  return read_dataset(f);
}

}  // namespace flowtune
