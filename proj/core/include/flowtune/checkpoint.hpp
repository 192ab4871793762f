// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "flowtune/flow.hpp"
#include "flowtune/policy.hpp"
#include "flowtune/pv.hpp"

namespace flowtune {

// Everything needed to resume training mid-stream or to evaluate: policies
// with optimizer state, the progressive-validation series, and the reference
// update gate's high-water mark.
struct Checkpoint {
  FlowSpec flow;
  PolicySet policies;
  PvAccumulator pv;
  std::uint64_t episodes_seen = 0;
  double gate_best = -1.0;  // best PV answer F1 seen at an update opportunity
  bool gate_has_record = false;
  std::uint64_t config_hash = 0;

  bool operator==(const Checkpoint& other) const;
};

// Binary format: magic "FLOWCKPT", format version, then fixed-width
// little-endian fields. save_checkpoint writes to a temp file and renames,
// so a crash never leaves a partial checkpoint behind. load_checkpoint
// rejects bad magic or versions without touching the output.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the canonical config rendering; stored in the checkpoint and
// compared (warning only) when resuming with a different configuration.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace flowtune
