// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/types.hpp"

#include <charconv>

namespace flowtune {

std::string to_string(const Token& t) {
  return (t.kind == TokenKind::Entity ? "e" : "r") + std::to_string(t.id);
}

Token parse_token(const std::string& s) {
  if (s.size() < 2 || (s[0] != 'e' && s[0] != 'r')) {
    throw MalformedInstanceError("bad token: '" + s + "'");
  }
  std::int32_t id = 0;
  auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), id);
  if (ec != std::errc{} || ptr != s.data() + s.size() || id < 0) {
    throw MalformedInstanceError("bad token: '" + s + "'");
  }
  return Token{s[0] == 'e' ? TokenKind::Entity : TokenKind::Relation, id};
}

const char* role_name(NodeRole role) {
  switch (role) {
    case NodeRole::QueryGen: return "query_gen";
    case NodeRole::Retrieve: return "retrieve";
    case NodeRole::StopRetrieval: return "stop_retrieval";
    case NodeRole::VerboseAnswer: return "verbose_answer";
    case NodeRole::ConciseAnswer: return "concise_answer";
    case NodeRole::Sufficiency: return "sufficiency";
  }
  throw ConfigError("unknown role");
}

NodeRole role_from_name(const std::string& name) {
  for (int i = 0; i < kNumRoles; ++i) {
    auto role = static_cast<NodeRole>(i);
    if (name == role_name(role)) return role;
  }
  throw ConfigError("unknown role name: '" + name + "'");
}

const char* variant_name(FlowVariant v) {
  return v == FlowVariant::Answerable ? "answerable" : "full";
}

FlowVariant variant_from_name(const std::string& name) {
  if (name == "answerable") return FlowVariant::Answerable;
  if (name == "full") return FlowVariant::Full;
  throw ConfigError("unknown flow variant: '" + name + "'");
}

const char* objective_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Support: return "support";
    case ObjectiveKind::Answer: return "answer";
    case ObjectiveKind::Sufficiency: return "sufficiency";
  }
  throw ConfigError("unknown objective");
}

}  // namespace flowtune
