// Copyright 2026 The CREAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cream {

/// SplitMix64 finalizer applied to `state + golden gamma`. Used to derive
/// independent child seeds from a parent seed and an index.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Purpose tags XOR-ed into the root seed so each consumer of randomness
/// owns a disjoint stream.
enum class Stream : std::uint64_t {
  kDataset = 1,
  kShuffle = 2,
  kTransform = 3,
  kAttack = 4,
  kInit = 5,
};

constexpr std::uint64_t stream_seed(std::uint64_t root, Stream s) noexcept {
  return root ^ static_cast<std::uint64_t>(s);
}

/// Child seed for item `index` of a stream. Results depend only on
/// (seed, index), never on iteration order or worker count.
constexpr std::uint64_t split_seed(std::uint64_t seed,
                                   std::uint64_t index) noexcept {
  std::uint64_t state = seed ^ (index * 0xD1B54A32D192ED03ULL);
  splitmix64(state);
  return splitmix64(state);
}

/// Deterministic PRNG built on std::mt19937_64, whose output sequence is
/// fixed by the C++ standard. Distributions are implemented here rather than
/// through <random> adaptors, which are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). Rejection sampling, so no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cream
