// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace taskadc {

// Counter-based generator: the i-th output is the SplitMix64 finalizer applied
// to key + i * golden_gamma. Independent streams are derived by hashing
// (seed, stream id) into a fresh key, so trials and channels can be drawn in
// any order with identical results.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  // Child generator for a sub-stream (trial, channel, ...).
  CounterRng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal, Box-Muller

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace taskadc
