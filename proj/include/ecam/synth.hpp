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

#ifndef ECAM__SYNTH_HPP_
#define ECAM__SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecam/data.hpp"
#include "ecam/gridmap.hpp"

namespace ecam
{

enum class Layout
{
  kCorridor,      // plus-shaped corridor junction
  kRooms,         // 3x3 rooms joined by doorways
  kRandomBlocks,  // axis-aligned rectangular obstacles
};

Layout parse_layout(const std::string & name);
std::string layout_name(Layout layout);

struct SceneSpec
{
  Layout layout{Layout::kCorridor};
  double width_m{24.0};
  double height_m{24.0};
  double meters_per_pixel{0.1};
  // Target obstacle area fraction; must leave >= 50% connected walkable area.
  double density{0.45};
  int pedestrians{40};
  double speed_min{0.5};
  double speed_max{2.0};
  double timestep_s{0.4};
  double clearance_m{0.5};
  double jitter_m{0.05};
  int frame_step{10};
  std::uint64_t seed{0};

  void validate() const;
};

struct GeneratedScene
{
  OccupancyMap map;
  std::vector<Series> series;
  std::vector<TrajectoryWindow> windows;
  int skipped_pedestrians{0};
};

// Obstacle layout only (deterministic in spec.seed).
OccupancyMap generate_map(const SceneSpec & spec);

/// Map plus clearance-respecting, constant-speed pedestrian tracks sliced
/// into windows.
GeneratedScene generate_scene(const SceneSpec & spec, const WindowConfig & windows = {});

/// Generates pedestrians on an existing map (e.g. a held-out split that
/// shares the map of a training scene).
GeneratedScene populate_scene(const OccupancyMap & map, const SceneSpec & spec, const WindowConfig & windows = {});

// Writes <stem>.pgm, <stem>_H.txt, <stem>.tsv and returns the manifest entry
// (paths relative to `dir`).
ManifestEntry write_scene(const GeneratedScene & scene, const std::filesystem::path & dir, const std::string & stem);

// Fraction of the map area covered by the largest 4-connected walkable region.
double largest_walkable_fraction(const OccupancyMap & map);

}  // namespace ecam

#endif  // ECAM__SYNTH_HPP_
