// Copyright 2026 The har-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Deterministic randomness. Every stochastic step in the harness draws from
// an Rng seeded through stable_hash, so runs replay bit-for-bit across
// platforms. std::uniform_*_distribution and std::shuffle are deliberately
// avoided: their outputs are implementation-defined.

#ifndef HARAUDIT_RNG_HPP_
#define HARAUDIT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "haraudit/errors.hpp"

namespace haraudit {

// 64-bit FNV-1a. Stable across platforms and releases; used to derive
// sub-seeds from (seed, tag, index...) tuples so independent random streams
// never share state.
class StableHash {
 public:
  StableHash() = default;

  // Each field is framed (type tag, then length for strings) so distinct
  // field sequences never produce the same byte stream: ("ab") and
  // ("a", "b") must derive different seeds.
  StableHash& mix(std::string_view s) {
    step(0x01);
    raw64(s.size());
    for (unsigned char c : s) step(c);
    return *this;
  }

  StableHash& mix(std::uint64_t v) {
    step(0x02);
    raw64(v);
    return *this;
  }

  StableHash& mix(std::int64_t v) { return mix(static_cast<std::uint64_t>(v)); }
  StableHash& mix(int v) { return mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }

  std::uint64_t digest() const { return state_; }

 private:
  void step(unsigned char c) {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }

  void raw64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) step(static_cast<unsigned char>(v >> (8 * i)));
  }

  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

template <typename... Parts>
std::uint64_t stable_hash(Parts&&... parts) {
  StableHash h;
  (h.mix(parts), ...);
  return h.digest();
}

// mt19937_64 with hand-rolled uniform/normal transforms so the produced
// sequence is identical on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, so no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_index: n must be positive");
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller; caches the second value of each pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Fisher-Yates. Deterministic given the engine state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace haraudit

#endif  // HARAUDIT_RNG_HPP_
