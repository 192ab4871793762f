// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/rng.hpp"

namespace flowtune {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Reject the tail of the 64-bit range that would bias the modulus.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  Rng r(base ^ (salt + 0x9e3779b97f4a7c15ULL + (salt << 6) + (salt >> 2)));
  return r.next_u64();
}

}  // namespace flowtune
