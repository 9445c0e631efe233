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

#include "ecam/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecam/errors.hpp"

namespace ecam
{

nlohmann::json SamplingConfig::to_json() const
{
  return {{"z_seeds", z_seeds},
          {"rho_m", rho_m},
          {"c_eps_m", c_eps_m},
          {"seed_radius_m", seed_radius_m},
          {"positive_t_mode", positive_t_mode == PositiveTimeMode::kAll ? "all" : "uniform"}};
}

SamplingConfig SamplingConfig::from_json(const nlohmann::json & j)
{
  SamplingConfig c;
  c.z_seeds = j.value("z_seeds", c.z_seeds);
  c.rho_m = j.value("rho_m", c.rho_m);
  c.c_eps_m = j.value("c_eps_m", c.c_eps_m);
  c.seed_radius_m = j.value("seed_radius_m", c.seed_radius_m);
  const std::string mode = j.value("positive_t_mode", std::string("uniform"));
  if (mode == "uniform") {
    c.positive_t_mode = PositiveTimeMode::kUniform;
  } else if (mode == "all") {
    c.positive_t_mode = PositiveTimeMode::kAll;
  } else {
    throw ValidationError("positive_t_mode must be 'uniform' or 'all'");
  }
  if (c.z_seeds < 1 || c.rho_m <= 0.0 || c.c_eps_m < 0.0 || c.seed_radius_m < 0.0) {
    throw ValidationError("invalid sampling configuration");
  }
  return c;
}

Vec2 draw_positive(std::span<const Vec2> future, int t, double c_eps, Rng & rng)
{
  if (t < 1 || t > static_cast<int>(future.size())) {
    throw IndexError("future step " + std::to_string(t) + " outside [1, " + std::to_string(future.size()) + "]");
  }
  const double ex = rng.normal();
  const double ey = rng.normal();
  return future[static_cast<std::size_t>(t - 1)] + c_eps * Vec2(ex, ey);
}

std::vector<std::size_t> select_seed_indices(std::span<const ContourPoint> contours, const Vec2 & ped_pos,
                                             double radius, int z, Rng & rng)
{
  if (z < 1) {
    throw ValidationError("Z must be >= 1");
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < contours.size(); ++i) {
    if ((contours[i].position - ped_pos).norm() <= radius) {
      pool.push_back(i);
    }
  }
  const auto zs = static_cast<std::size_t>(z);
  if (pool.size() < zs) {
    pool.resize(contours.size());
    for (std::size_t i = 0; i < contours.size(); ++i) {
      pool[i] = i;
    }
  }
  std::vector<std::size_t> out;
  if (pool.empty()) {
    return out;
  }
  if (pool.size() >= zs) {
    // Partial Fisher-Yates: first z entries become a uniform distinct subset.
    for (std::size_t i = 0; i < zs; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(zs));
  } else {
    out.reserve(zs);
    for (std::size_t i = 0; i < zs; ++i) {
      out.push_back(pool[rng.index(pool.size())]);
    }
  }
  return out;
}

std::vector<ContourPoint> select_seeds(std::span<const ContourPoint> contours, const Vec2 & ped_pos,
                                       double radius, int z, Rng & rng)
{
  std::vector<ContourPoint> out;
  for (const auto i : select_seed_indices(contours, ped_pos, radius, z, rng)) {
    out.push_back(contours[i]);
  }
  return out;
}

std::vector<Vec2> expand_negatives(std::span<const ContourPoint> seeds, double rho, double c_eps, Rng & rng)
{
  if (rho <= 0.0) {
    throw ValidationError("rho must be positive");
  }
  std::vector<Vec2> out;
  out.reserve(seeds.size() * SamplingConfig::kDirections);
  for (const auto & seed : seeds) {
    for (int p = 0; p < SamplingConfig::kDirections; ++p) {
      const double theta = std::numbers::pi / 4.0 * p;
      const double ex = rng.normal();
      const double ey = rng.normal();
      out.push_back(seed.position + rho * Vec2(std::cos(theta), std::sin(theta)) + c_eps * Vec2(ex, ey));
    }
  }
  return out;
}

SampleSet build_sample_set(const TrajectoryWindow & window, std::span<const ContourPoint> contours,
                           const SamplingConfig & cfg, std::uint64_t seed)
{
  if (window.future.empty() || window.past.empty()) {
    throw ValidationError("sample set needs observed and ground-truth future positions");
  }
  SampleSet s;
  Rng time_rng = make_stream(seed, Stream::kPositiveTime);
  Rng pos_rng = make_stream(seed, Stream::kPositiveNoise);
  const int t_pred = static_cast<int>(window.future.size());
  if (cfg.positive_t_mode == PositiveTimeMode::kUniform) {
    s.positive_steps.push_back(1 + static_cast<int>(time_rng.index(static_cast<std::size_t>(t_pred))));
  } else {
    for (int t = 1; t <= t_pred; ++t) {
      s.positive_steps.push_back(t);
    }
  }
  for (const int t : s.positive_steps) {
    s.positives.push_back(draw_positive(window.future, t, cfg.c_eps_m, pos_rng));
  }

  Rng seed_rng = make_stream(seed, Stream::kSeedSelect);
  Rng neg_rng = make_stream(seed, Stream::kNegativeNoise);
  s.seed_indices = select_seed_indices(contours, window.past.back(), cfg.seed_radius_m, cfg.z_seeds, seed_rng);
  if (s.seed_indices.empty()) {
    s.skip = true;
    return s;
  }
  std::vector<ContourPoint> seeds;
  seeds.reserve(s.seed_indices.size());
  for (const auto i : s.seed_indices) {
    seeds.push_back(contours[i]);
  }
  s.negatives = expand_negatives(seeds, cfg.rho_m, cfg.c_eps_m, neg_rng);
  return s;
}

}  // namespace ecam
