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

#ifndef ECAM__LOSSES_HPP_
#define ECAM__LOSSES_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/gridmap.hpp"
#include "ecam/model.hpp"

namespace ecam
{

/// True iff any trajectory point lies over an obstacle (or off the map).
/// With segment_check, every cell crossed by a segment between consecutive
/// points is tested as well.
bool collides(std::span<const Vec2> trajectory, const OccupancyMap & map, bool segment_check = false);

// mask[ped][k] = 1 when sample k of pedestrian ped collides.
using CollisionMask = std::vector<std::vector<std::uint8_t>>;

CollisionMask collision_mask(const PredictionSet & preds, const OccupancyMap & map, bool segment_check = false);
// One map per pedestrian.
CollisionMask collision_mask(const PredictionSet & preds, std::span<const OccupancyMap * const> maps,
                             bool segment_check = false);

struct LossResult
{
  double value{0.0};
  PredictionSet grad;  // d(value)/d(prediction), same shape as the predictions
};

struct EnvCollisionResult : LossResult
{
  std::size_t colliding{0};
  std::size_t total{0};
};

/// Mean over pedestrians of the mean squared trajectory error over that
/// pedestrian's colliding samples; the mask acts as a constant gate.
EnvCollisionResult env_collision_loss(const PredictionSet & preds, std::span<const Trajectory> gt,
                                      const CollisionMask & mask);
EnvCollisionResult env_collision_loss(const PredictionSet & preds, std::span<const Trajectory> gt,
                                      const OccupancyMap & map, bool segment_check = false);

struct VarietyResult : LossResult
{
  std::vector<std::size_t> argmin;
};

/// Best-of-K mean-per-step squared displacement; only the argmin sample of
/// each pedestrian receives gradient (lowest index wins ties).
VarietyResult variety_loss(const PredictionSet & preds, std::span<const Trajectory> gt);

struct LossBreakdown
{
  double variety{0.0};
  double env_col{0.0};
  double map_nce{0.0};
  double total{0.0};
  double colliding_fraction{0.0};

  nlohmann::json to_json() const;
};

LossBreakdown total_loss(double variety, double env_col, double map_nce, double lambda_env, double lambda_nce,
                         double colliding_fraction = 0.0);

}  // namespace ecam

#endif  // ECAM__LOSSES_HPP_
