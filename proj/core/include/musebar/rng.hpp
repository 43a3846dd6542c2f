// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace musebar {

// Deterministic, splittable random source. The distribution helpers are
// implemented here rather than with <random> distributions so streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  // Uniform in [lo, hi] inclusive.
  int uniform_range(int lo, int hi);
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }
  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  // Independent child stream; the parent advances by one draw.
  Rng split() { return Rng(mix(next_u64())); }
  // Child stream keyed by `key` that leaves the parent untouched.
  Rng fork(std::uint64_t key) const { return Rng(mix(seed_ ^ mix(key + 1))); }

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace musebar
