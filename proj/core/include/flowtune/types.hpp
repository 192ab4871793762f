// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace flowtune {

// Tokens are drawn from two disjoint finite alphabets. Entities name things,
// relations name edges between them. Rendered as "e<id>" / "r<id>".
enum class TokenKind : std::uint8_t { Entity = 0, Relation = 1 };

struct Token {
  TokenKind kind = TokenKind::Entity;
  std::int32_t id = 0;

  auto operator<=>(const Token&) const = default;
};

inline Token entity_token(std::int32_t id) { return Token{TokenKind::Entity, id}; }
inline Token relation_token(std::int32_t id) { return Token{TokenKind::Relation, id}; }

std::string to_string(const Token& t);
Token parse_token(const std::string& s);

using DocId = std::int32_t;

// The six node roles of the flow, in execution order.
enum class NodeRole : std::uint8_t {
  QueryGen = 0,
  Retrieve = 1,
  StopRetrieval = 2,
  VerboseAnswer = 3,
  ConciseAnswer = 4,
  Sufficiency = 5,
};

inline constexpr int kNumRoles = 6;

const char* role_name(NodeRole role);
NodeRole role_from_name(const std::string& name);

enum class FlowVariant : std::uint8_t {
  Answerable = 0,  // retrieval loop -> verbose -> concise
  Full = 1,        // adds the sufficiency decision after the answer
};

const char* variant_name(FlowVariant v);
FlowVariant variant_from_name(const std::string& name);

// Node selection mode. Greedy is the training and evaluation default;
// SeededSample draws from the softmax and exists for diagnostics.
enum class Mode : std::uint8_t { Greedy = 0, SeededSample = 1 };

// Each node role is scored against exactly one of these objectives.
enum class ObjectiveKind : std::uint8_t { Support = 0, Answer = 1, Sufficiency = 2 };

inline constexpr int kNumObjectives = 3;

const char* objective_name(ObjectiveKind k);

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (flags, config file, flow parameters).
struct ConfigError : Error {
  using Error::Error;
};

// An operation was invoked before its inputs exist in the conversation state,
// e.g. asking for the ConciseAnswer observation before a verbose answer is set.
struct SequencingError : Error {
  using Error::Error;
};

// An instance violates a dataset invariant (duplicate ids, empty action set,
// candidate count below the retrieval cap, ...).
struct MalformedInstanceError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace flowtune
