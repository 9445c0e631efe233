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

#ifndef ECAM__METRICS_HPP_
#define ECAM__METRICS_HPP_

#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "ecam/gridmap.hpp"
#include "ecam/model.hpp"

namespace ecam
{

struct AdeFde
{
  double ade{0.0};
  double fde{0.0};
};

/// Best-of-K ADE and FDE averaged over pedestrians. The two minima are taken
/// independently per pedestrian, so they may come from different samples.
AdeFde ade_fde_min(const PredictionSet & preds, std::span<const Trajectory> gt);

// Per-pedestrian (min ADE, min FDE).
std::vector<AdeFde> ade_fde_min_per_pedestrian(const PredictionSet & preds, std::span<const Trajectory> gt);

std::size_t count_colliding(const PredictionSet & preds, const OccupancyMap & map);

/// Percentage of predicted trajectories with no point over an obstacle.
double ecfl(const PredictionSet & preds, const OccupancyMap & map);

struct SceneMetrics
{
  double ade_min{0.0};
  double fde_min{0.0};
  double ecfl{100.0};
  std::size_t n_pedestrians{0};
  std::size_t colliding{0};
};

struct MetricsReport
{
  double ade_min{0.0};
  double fde_min{0.0};
  double ecfl{100.0};
  std::size_t n_pedestrians{0};
  std::size_t k_samples{0};
  std::map<std::string, SceneMetrics> per_scene;

  nlohmann::json to_json(bool per_scene_entries = false) const;
};

/// Streams batches of predictions (possibly from several scenes) into one
/// dataset-level report.
class MetricsAccumulator
{
public:
  void add(const PredictionSet & preds, std::span<const Trajectory> gt, const OccupancyMap & map,
           const std::string & scene_label);
  MetricsReport report() const;

private:
  struct Sums
  {
    double ade{0.0};
    double fde{0.0};
    std::size_t n{0};
    std::size_t trajectories{0};
    std::size_t colliding{0};
  };
  Sums total_;
  std::map<std::string, Sums> scenes_;
  std::size_t k_{0};
};

}  // namespace ecam

#endif  // ECAM__METRICS_HPP_
