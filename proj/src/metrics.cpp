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

#include "ecam/metrics.hpp"

#include <limits>

#include "ecam/errors.hpp"
#include "ecam/losses.hpp"

namespace ecam
{

std::vector<AdeFde> ade_fde_min_per_pedestrian(const PredictionSet & preds, std::span<const Trajectory> gt)
{
  if (gt.empty()) {
    throw ValidationError("cannot compute ADE/FDE over an empty dataset");
  }
  if (preds.samples.size() != gt.size()) {
    throw ShapeError("predictions and ground truth cover different pedestrian counts");
  }
  std::vector<AdeFde> out(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto & truth = gt[i];
    if (truth.empty() || preds.samples[i].empty()) {
      throw ValidationError("empty trajectory or sample set");
    }
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (const auto & s : preds.samples[i]) {
      if (s.size() != truth.size()) {
        throw ShapeError("prediction length differs from ground truth");
      }
      double ade = 0.0;
      for (std::size_t t = 0; t < truth.size(); ++t) {
        ade += (s[t] - truth[t]).norm();
      }
      ade /= static_cast<double>(truth.size());
      best_ade = std::min(best_ade, ade);
      best_fde = std::min(best_fde, (s.back() - truth.back()).norm());
    }
    out[i] = {best_ade, best_fde};
  }
  return out;
}

AdeFde ade_fde_min(const PredictionSet & preds, std::span<const Trajectory> gt)
{
  AdeFde mean;
  const auto per = ade_fde_min_per_pedestrian(preds, gt);
  for (const auto & p : per) {
    mean.ade += p.ade;
    mean.fde += p.fde;
  }
  mean.ade /= static_cast<double>(per.size());
  mean.fde /= static_cast<double>(per.size());
  return mean;
}

std::size_t count_colliding(const PredictionSet & preds, const OccupancyMap & map)
{
  std::size_t n = 0;
  for (const auto & ped : preds.samples) {
    for (const auto & s : ped) {
      n += collides(s, map) ? 1 : 0;
    }
  }
  return n;
}

double ecfl(const PredictionSet & preds, const OccupancyMap & map)
{
  std::size_t total = 0;
  for (const auto & ped : preds.samples) {
    total += ped.size();
  }
  if (total == 0) {
    throw ValidationError("ECFL needs at least one predicted trajectory");
  }
  return 100.0 - 100.0 * static_cast<double>(count_colliding(preds, map)) / static_cast<double>(total);
}

void MetricsAccumulator::add(const PredictionSet & preds, std::span<const Trajectory> gt, const OccupancyMap & map,
                             const std::string & scene_label)
{
  if (gt.empty()) {
    return;
  }
  const auto per = ade_fde_min_per_pedestrian(preds, gt);
  Sums delta;
  for (const auto & p : per) {
    delta.ade += p.ade;
    delta.fde += p.fde;
  }
  delta.n = per.size();
  for (const auto & ped : preds.samples) {
    delta.trajectories += ped.size();
    if (k_ == 0) {
      k_ = ped.size();
    }
  }
  delta.colliding = count_colliding(preds, map);
  for (Sums * s : {&total_, &scenes_[scene_label]}) {
    s->ade += delta.ade;
    s->fde += delta.fde;
    s->n += delta.n;
    s->trajectories += delta.trajectories;
    s->colliding += delta.colliding;
  }
}

MetricsReport MetricsAccumulator::report() const
{
  if (total_.n == 0) {
    throw ValidationError("no pedestrians were evaluated");
  }
  const auto finish = [](const Sums & s) {
    SceneMetrics m;
    m.n_pedestrians = s.n;
    m.colliding = s.colliding;
    m.ade_min = s.ade / static_cast<double>(s.n);
    m.fde_min = s.fde / static_cast<double>(s.n);
    m.ecfl = 100.0 - 100.0 * static_cast<double>(s.colliding) / static_cast<double>(s.trajectories);
    return m;
  };
  MetricsReport r;
  const SceneMetrics all = finish(total_);
  r.ade_min = all.ade_min;
  r.fde_min = all.fde_min;
  r.ecfl = all.ecfl;
  r.n_pedestrians = all.n_pedestrians;
  r.k_samples = k_;
  for (const auto & [label, sums] : scenes_) {
    r.per_scene[label] = finish(sums);
  }
  return r;
}

nlohmann::json MetricsReport::to_json(bool per_scene_entries) const
{
  nlohmann::json j = {{"ade_min", ade_min},
                      {"fde_min", fde_min},
                      {"ecfl", ecfl},
                      {"n_pedestrians", n_pedestrians},
                      {"k_samples", k_samples}};
  if (per_scene_entries) {
    nlohmann::json scenes = nlohmann::json::object();
    for (const auto & [label, m] : per_scene) {
      scenes[label] = {{"ade_min", m.ade_min}, {"fde_min", m.fde_min}, {"ecfl", m.ecfl},
                       {"n_pedestrians", m.n_pedestrians}};
    }
    j["per_scene"] = scenes;
  }
  return j;
}

}  // namespace ecam
