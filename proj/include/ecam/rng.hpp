// Copyright 2026 The ECAM Authors
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

#ifndef ECAM__RNG_HPP_
#define ECAM__RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ecam
{

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Folds a parent seed and a path of stream identifiers into an independent child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
{
  std::uint64_t s = splitmix64(seed);
  for (const auto p : path) {
    s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  }
  return s;
}

// Sub-stream identifiers. Each consumer of randomness draws from its own stream
// so that, e.g., negative samples never shift when positive draws change.
enum class Stream : std::uint64_t
{
  kDecoderNoise = 1,
  kPositiveTime = 2,
  kPositiveNoise = 3,
  kSeedSelect = 4,
  kNegativeNoise = 5,
  kShuffle = 6,
  kInit = 7,
  kScene = 8,
};

class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n)
  {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64 & engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
{
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(stream), index}));
}

}  // namespace ecam

#endif  // ECAM__RNG_HPP_
