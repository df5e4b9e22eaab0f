// Copyright 2026 The MuCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MUCS_RNG_HPP_
#define MUCS_RNG_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace mucs {

// FNV-1a over bytes; used for deriving per-item RNG streams from string ids.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// SplitMix64 finalizer; mixes a seed with a stream tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return mix_seed(seed, fnv1a64(tag));
}

// Deterministic RNG. Draws are defined directly on the mt19937_64 output
// stream (rejection sampling for bounded ints, 53-bit mantissa fills for
// unit doubles) so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() { return eng_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below needs a positive bound");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return static_cast<std::size_t>(v % bound);
  }

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  // Derived generator for an independent sub-stream.
  Rng fork(std::string_view tag) const { return Rng(mix_seed(seed_, tag)); }
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace mucs

#endif  // MUCS_RNG_HPP_
