// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace flowtune {

// Deterministic 64-bit generator (splitmix64). The standard <random>
// distributions are implementation-defined, so every random draw in the
// project goes through this class to keep datasets and diagnostics
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1) with 53 bits of precision.
  double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Derives an independent stream, e.g. one per dataset instance.
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable stream derivation from a base seed and a label, used to decouple
// consumers (dataset gen, per-instance sampling, diagnostics) from each other.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace flowtune
