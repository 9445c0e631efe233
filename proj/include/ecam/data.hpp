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

#ifndef ECAM__DATA_HPP_
#define ECAM__DATA_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecam/gridmap.hpp"

namespace ecam
{

struct RawObservation
{
  int frame_id{0};
  int ped_id{0};
  double x{0.0};
  double y{0.0};
};

// One pedestrian's track at uniform frame spacing.
struct Series
{
  int ped_id{0};
  std::vector<int> frames;
  std::vector<Vec2> points;
};

struct TrajectoryWindow
{
  int ped_id{0};
  int start_frame{0};
  std::vector<Vec2> past;
  std::vector<Vec2> future;
  std::string scene_label;
};

struct WindowConfig
{
  int obs_len{8};
  int pred_len{12};
  int stride{1};
};

std::vector<RawObservation> parse_observations(const std::filesystem::path & file);

/// Groups rows by pedestrian, sorts by frame, and splits each track wherever
/// the frame step differs from the file's dominant step.
std::vector<Series> load_trajectories(const std::filesystem::path & file);
std::vector<Series> group_series(std::vector<RawObservation> rows);

std::vector<TrajectoryWindow> make_windows(const Series & series, const WindowConfig & cfg,
                                           const std::string & scene_label = {});
std::vector<TrajectoryWindow> make_windows(const std::vector<Series> & series, const WindowConfig & cfg,
                                           const std::string & scene_label = {});

void write_trajectories(const std::vector<Series> & series, const std::filesystem::path & file);

struct ManifestEntry
{
  std::string label;
  std::filesystem::path trajectories;
  std::filesystem::path map;
  std::filesystem::path homography;
};

struct Manifest
{
  std::vector<ManifestEntry> scenes;
};

// Relative paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path & file);
void write_manifest(const Manifest & manifest, const std::filesystem::path & file);

struct Scene
{
  std::string label;
  OccupancyMap map;
  std::vector<Series> series;
  std::vector<TrajectoryWindow> windows;
};

Scene load_scene(const ManifestEntry & entry, const WindowConfig & cfg);
std::vector<Scene> load_scenes(const Manifest & manifest, const WindowConfig & cfg,
                               const std::optional<std::string> & only_label = std::nullopt,
                               const std::optional<std::string> & exclude_label = std::nullopt);

}  // namespace ecam

#endif  // ECAM__DATA_HPP_
