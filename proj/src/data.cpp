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

#include "ecam/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ecam/errors.hpp"

namespace ecam
{

std::vector<RawObservation> parse_observations(const std::filesystem::path & file)
{
  std::ifstream in(file);
  if (!in) {
    throw FormatError("cannot open trajectory file " + file.string());
  }
  std::vector<RawObservation> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream ss(line);
    double frame = 0.0;
    double ped = 0.0;
    RawObservation row;
    std::string extra;
    if (!(ss >> frame >> ped >> row.x >> row.y) || (ss >> extra)) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": expected 'frame ped x y'");
    }
    if (!std::isfinite(frame) || !std::isfinite(ped) || !std::isfinite(row.x) || !std::isfinite(row.y)) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": non-finite value");
    }
    row.frame_id = static_cast<int>(std::trunc(frame));
    row.ped_id = static_cast<int>(std::trunc(ped));
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw ValidationError(file.string() + ": no observations");
  }
  return rows;
}

std::vector<Series> group_series(std::vector<RawObservation> rows)
{
  std::sort(rows.begin(), rows.end(), [](const RawObservation & a, const RawObservation & b) {
    return a.ped_id != b.ped_id ? a.ped_id < b.ped_id : a.frame_id < b.frame_id;
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ped_id == rows[i - 1].ped_id && rows[i].frame_id == rows[i - 1].frame_id) {
      throw ValidationError("duplicate observation for ped " + std::to_string(rows[i].ped_id) +
                            " at frame " + std::to_string(rows[i].frame_id));
    }
  }

  // Dominant frame step over all pedestrians; ties resolve to the smaller step.
  std::map<int, std::size_t> step_counts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ped_id == rows[i - 1].ped_id) {
      ++step_counts[rows[i].frame_id - rows[i - 1].frame_id];
    }
  }
  int step = 0;
  std::size_t best = 0;
  for (const auto & [s, n] : step_counts) {
    if (n > best) {
      step = s;
      best = n;
    }
  }

  std::vector<Series> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool continues = i > 0 && rows[i].ped_id == rows[i - 1].ped_id &&
                           rows[i].frame_id - rows[i - 1].frame_id == step;
    if (!continues) {
      out.push_back(Series{rows[i].ped_id, {}, {}});
    }
    out.back().frames.push_back(rows[i].frame_id);
    out.back().points.emplace_back(rows[i].x, rows[i].y);
  }
  return out;
}

std::vector<Series> load_trajectories(const std::filesystem::path & file)
{
  return group_series(parse_observations(file));
}

std::vector<TrajectoryWindow> make_windows(const Series & series, const WindowConfig & cfg,
                                           const std::string & scene_label)
{
  if (cfg.obs_len < 1 || cfg.pred_len < 1) {
    throw ValidationError("obs_len and pred_len must be >= 1");
  }
  if (cfg.stride < 1) {
    throw ValidationError("window stride must be >= 1");
  }
  std::vector<TrajectoryWindow> out;
  const std::size_t len = static_cast<std::size_t>(cfg.obs_len + cfg.pred_len);
  if (series.points.size() < len) {
    return out;
  }
  for (std::size_t s = 0; s + len <= series.points.size(); s += static_cast<std::size_t>(cfg.stride)) {
    TrajectoryWindow w;
    w.ped_id = series.ped_id;
    w.start_frame = series.frames[s];
    w.scene_label = scene_label;
    const auto begin = series.points.begin() + static_cast<std::ptrdiff_t>(s);
    w.past.assign(begin, begin + cfg.obs_len);
    w.future.assign(begin + cfg.obs_len, begin + static_cast<std::ptrdiff_t>(len));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TrajectoryWindow> make_windows(const std::vector<Series> & series, const WindowConfig & cfg,
                                           const std::string & scene_label)
{
  std::vector<TrajectoryWindow> out;
  for (const auto & s : series) {
    auto w = make_windows(s, cfg, scene_label);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

void write_trajectories(const std::vector<Series> & series, const std::filesystem::path & file)
{
  struct Row
  {
    int frame;
    int ped;
    Vec2 p;
  };
  std::vector<Row> rows;
  for (const auto & s : series) {
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      rows.push_back({s.frames[i], s.ped_id, s.points[i]});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row & a, const Row & b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
  });
  std::ofstream out(file);
  if (!out) {
    throw FormatError("cannot write " + file.string());
  }
  char buf[128];
  for (const auto & r : rows) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%.6f\t%.6f\n", r.frame, r.ped, r.p.x(), r.p.y());
    out << buf;
  }
}

Manifest load_manifest(const std::filesystem::path & file)
{
  std::ifstream in(file);
  if (!in) {
    throw FormatError("cannot open manifest " + file.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  const auto base = file.parent_path();
  const auto resolve = [&](const std::string & p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  Manifest m;
  try {
    for (const auto & s : j.at("scenes")) {
      ManifestEntry e;
      e.trajectories = resolve(s.at("trajectories").get<std::string>());
      e.map = resolve(s.at("map").get<std::string>());
      e.homography = resolve(s.at("homography").get<std::string>());
      e.label = s.contains("label") ? s.at("label").get<std::string>() : e.trajectories.stem().string();
      m.scenes.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  if (m.scenes.empty()) {
    throw ValidationError(file.string() + ": manifest lists no scenes");
  }
  return m;
}

void write_manifest(const Manifest & manifest, const std::filesystem::path & file)
{
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto & s : manifest.scenes) {
    scenes.push_back({{"label", s.label},
                      {"trajectories", s.trajectories.generic_string()},
                      {"map", s.map.generic_string()},
                      {"homography", s.homography.generic_string()}});
  }
  std::ofstream out(file);
  if (!out) {
    throw FormatError("cannot write " + file.string());
  }
  out << nlohmann::json{{"scenes", scenes}}.dump(2) << "\n";
}

Scene load_scene(const ManifestEntry & entry, const WindowConfig & cfg)
{
  for (const auto & p : {entry.trajectories, entry.map, entry.homography}) {
    if (!std::filesystem::exists(p)) {
      throw ValidationError("missing file referenced by manifest: " + p.string());
    }
  }
  auto map = load_map(entry.map, entry.homography);
  auto series = load_trajectories(entry.trajectories);
  auto windows = make_windows(series, cfg, entry.label);
  return Scene{entry.label, std::move(map), std::move(series), std::move(windows)};
}

std::vector<Scene> load_scenes(const Manifest & manifest, const WindowConfig & cfg,
                               const std::optional<std::string> & only_label,
                               const std::optional<std::string> & exclude_label)
{
  std::vector<Scene> out;
  for (const auto & e : manifest.scenes) {
    if (only_label && e.label != *only_label) {
      continue;
    }
    if (exclude_label && e.label == *exclude_label) {
      continue;
    }
    out.push_back(load_scene(e, cfg));
  }
  if (out.empty()) {
    throw ValidationError("no scenes selected from manifest");
  }
  return out;
}

}  // namespace ecam
