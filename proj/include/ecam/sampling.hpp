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

#ifndef ECAM__SAMPLING_HPP_
#define ECAM__SAMPLING_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/data.hpp"
#include "ecam/gridmap.hpp"
#include "ecam/rng.hpp"

namespace ecam
{

enum class PositiveTimeMode
{
  kUniform,  // one future step drawn per pedestrian per training step
  kAll,      // one positive for every future step
};

struct SamplingConfig
{
  int z_seeds{10};
  double rho_m{0.5};
  double c_eps_m{0.05};
  double seed_radius_m{8.0};
  PositiveTimeMode positive_t_mode{PositiveTimeMode::kUniform};

  static constexpr int kDirections = 8;
  int num_negatives() const { return z_seeds * kDirections; }

  nlohmann::json to_json() const;
  static SamplingConfig from_json(const nlohmann::json & j);
};

/// Positive and obstacle-contour negatives for one pedestrian.
struct SampleSet
{
  std::vector<Vec2> positives;  // one entry, or T_pred entries in kAll mode
  std::vector<int> positive_steps;  // 1-based future step of each positive
  std::vector<Vec2> negatives;  // seed-major, direction-minor
  std::vector<std::size_t> seed_indices;
  bool skip{false};

  const Vec2 & positive() const { return positives.front(); }
};

// future[t-1] + N(0, c_eps^2 I); t is 1-based.
Vec2 draw_positive(std::span<const Vec2> future, int t, double c_eps, Rng & rng);

/// Indices of Z seeds among the contours: distinct and within `radius` when
/// enough are in range, else widened to all contours, else with replacement.
std::vector<std::size_t> select_seed_indices(std::span<const ContourPoint> contours, const Vec2 & ped_pos,
                                             double radius, int z, Rng & rng);
std::vector<ContourPoint> select_seeds(std::span<const ContourPoint> contours, const Vec2 & ped_pos,
                                       double radius, int z, Rng & rng);

// c + rho (cos(pi p / 4), sin(pi p / 4)) + N(0, c_eps^2 I), p = 0..7.
std::vector<Vec2> expand_negatives(std::span<const ContourPoint> seeds, double rho, double c_eps, Rng & rng);

/// Randomness is split into independent streams (positive step, positive
/// noise, seed choice, negative noise) derived from `seed`, so negatives do
/// not depend on the ground-truth future.
SampleSet build_sample_set(const TrajectoryWindow & window, std::span<const ContourPoint> contours,
                           const SamplingConfig & cfg, std::uint64_t seed);

}  // namespace ecam

#endif  // ECAM__SAMPLING_HPP_
