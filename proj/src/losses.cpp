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

#include "ecam/losses.hpp"

#include <cmath>
#include <limits>

#include "ecam/errors.hpp"

namespace ecam
{

namespace
{

// Visits every grid cell touched by the pixel-space segment a -> b
// (Amanatides-Woo traversal) and reports whether any is an obstacle.
bool segment_hits_obstacle(const OccupancyMap & map, const Vec2 & a, const Vec2 & b)
{
  if (!a.allFinite() || !b.allFinite()) {
    return true;
  }
  const double limit = 4.0 * (map.width() + map.height());
  if (a.cwiseAbs().maxCoeff() > limit || b.cwiseAbs().maxCoeff() > limit) {
    return true;
  }
  int cx = static_cast<int>(std::floor(a.x()));
  int cy = static_cast<int>(std::floor(a.y()));
  const int ex = static_cast<int>(std::floor(b.x()));
  const int ey = static_cast<int>(std::floor(b.y()));
  const Vec2 d = b - a;
  const int step_x = d.x() > 0 ? 1 : -1;
  const int step_y = d.y() > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double t_max_x = kInf;
  double t_max_y = kInf;
  double t_dx = kInf;
  double t_dy = kInf;
  if (d.x() != 0.0) {
    const double next = step_x > 0 ? cx + 1.0 : static_cast<double>(cx);
    t_max_x = (next - a.x()) / d.x();
    t_dx = step_x / d.x();
  }
  if (d.y() != 0.0) {
    const double next = step_y > 0 ? cy + 1.0 : static_cast<double>(cy);
    t_max_y = (next - a.y()) / d.y();
    t_dy = step_y / d.y();
  }
  const int max_steps = std::abs(ex - cx) + std::abs(ey - cy) + 1;
  for (int i = 0; i < max_steps; ++i) {
    if (map.cell_is_obstacle(cy, cx)) {
      return true;
    }
    if (cx == ex && cy == ey) {
      break;
    }
    if (t_max_x < t_max_y) {
      cx += step_x;
      t_max_x += t_dx;
    } else {
      cy += step_y;
      t_max_y += t_dy;
    }
  }
  return map.cell_is_obstacle(ey, ex);
}

void check_shapes(const PredictionSet & preds, std::span<const Trajectory> gt)
{
  if (preds.samples.size() != gt.size()) {
    throw ShapeError("predictions and ground truth cover different pedestrian counts");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (preds.samples[i].empty()) {
      throw ValidationError("K must be >= 1");
    }
    for (const auto & s : preds.samples[i]) {
      if (s.size() != gt[i].size()) {
        throw ShapeError("prediction length differs from ground truth");
      }
    }
  }
}

PredictionSet zeros_like(const PredictionSet & preds)
{
  PredictionSet g;
  g.samples.resize(preds.samples.size());
  for (std::size_t i = 0; i < preds.samples.size(); ++i) {
    g.samples[i].assign(preds.samples[i].size(), Trajectory{});
    for (std::size_t k = 0; k < preds.samples[i].size(); ++k) {
      g.samples[i][k].assign(preds.samples[i][k].size(), Vec2::Zero());
    }
  }
  return g;
}

double squared_error(const Trajectory & a, const Trajectory & b)
{
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    s += (a[t] - b[t]).squaredNorm();
  }
  return s;
}

}  // namespace

bool collides(std::span<const Vec2> trajectory, const OccupancyMap & map, bool segment_check)
{
  for (const auto & p : trajectory) {
    if (is_obstacle(map, p)) {
      return true;
    }
  }
  if (segment_check) {
    for (std::size_t t = 1; t < trajectory.size(); ++t) {
      if (segment_hits_obstacle(map, world_to_pixel(map, trajectory[t - 1]), world_to_pixel(map, trajectory[t]))) {
        return true;
      }
    }
  }
  return false;
}

CollisionMask collision_mask(const PredictionSet & preds, const OccupancyMap & map, bool segment_check)
{
  CollisionMask mask(preds.samples.size());
  for (std::size_t i = 0; i < preds.samples.size(); ++i) {
    mask[i].reserve(preds.samples[i].size());
    for (const auto & s : preds.samples[i]) {
      mask[i].push_back(collides(s, map, segment_check) ? 1 : 0);
    }
  }
  return mask;
}

CollisionMask collision_mask(const PredictionSet & preds, std::span<const OccupancyMap * const> maps,
                             bool segment_check)
{
  if (maps.size() != preds.samples.size()) {
    throw ShapeError("one map per pedestrian required");
  }
  CollisionMask mask(preds.samples.size());
  for (std::size_t i = 0; i < preds.samples.size(); ++i) {
    mask[i].reserve(preds.samples[i].size());
    for (const auto & s : preds.samples[i]) {
      mask[i].push_back(collides(s, *maps[i], segment_check) ? 1 : 0);
    }
  }
  return mask;
}

EnvCollisionResult env_collision_loss(const PredictionSet & preds, std::span<const Trajectory> gt,
                                      const CollisionMask & mask)
{
  check_shapes(preds, gt);
  if (mask.size() != preds.samples.size()) {
    throw ShapeError("collision mask does not match predictions");
  }
  EnvCollisionResult r;
  r.grad = zeros_like(preds);
  const std::size_t n = preds.samples.size();
  if (n == 0) {
    return r;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto & samples = preds.samples[i];
    std::size_t count = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      count += mask[i].at(k) ? 1 : 0;
    }
    r.total += samples.size();
    r.colliding += count;
    if (count == 0) {
      continue;
    }
    const double w = 1.0 / (static_cast<double>(count) * static_cast<double>(n));
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (!mask[i][k]) {
        continue;
      }
      r.value += w * squared_error(samples[k], gt[i]);
      for (std::size_t t = 0; t < gt[i].size(); ++t) {
        r.grad.samples[i][k][t] = 2.0 * w * (samples[k][t] - gt[i][t]);
      }
    }
  }
  return r;
}

EnvCollisionResult env_collision_loss(const PredictionSet & preds, std::span<const Trajectory> gt,
                                      const OccupancyMap & map, bool segment_check)
{
  check_shapes(preds, gt);
  return env_collision_loss(preds, gt, collision_mask(preds, map, segment_check));
}

VarietyResult variety_loss(const PredictionSet & preds, std::span<const Trajectory> gt)
{
  check_shapes(preds, gt);
  VarietyResult r;
  r.grad = zeros_like(preds);
  const std::size_t n = preds.samples.size();
  r.argmin.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto & samples = preds.samples[i];
    const double steps = static_cast<double>(gt[i].size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const double e = squared_error(samples[k], gt[i]) / steps;
      if (e < best) {
        best = e;
        r.argmin[i] = k;
      }
    }
    r.value += best / static_cast<double>(n);
    const auto & s = samples[r.argmin[i]];
    for (std::size_t t = 0; t < gt[i].size(); ++t) {
      r.grad.samples[i][r.argmin[i]][t] = 2.0 / (steps * static_cast<double>(n)) * (s[t] - gt[i][t]);
    }
  }
  return r;
}

nlohmann::json LossBreakdown::to_json() const
{
  return {{"variety", variety}, {"env_col", env_col}, {"map_nce", map_nce},
          {"total", total}, {"colliding_fraction", colliding_fraction}};
}

LossBreakdown total_loss(double variety, double env_col, double map_nce, double lambda_env, double lambda_nce,
                         double colliding_fraction)
{
  if (lambda_env < 0.0 || lambda_nce < 0.0) {
    throw ValidationError("loss weights must be non-negative");
  }
  LossBreakdown b;
  b.variety = variety;
  b.env_col = env_col;
  b.map_nce = map_nce;
  b.total = variety + lambda_env * env_col + lambda_nce * map_nce;
  b.colliding_fraction = colliding_fraction;
  return b;
}

}  // namespace ecam
