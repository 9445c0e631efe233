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

#include "ecam/synth.hpp"

#include <doctest.h>

#include "ecam/errors.hpp"
#include "ecam/losses.hpp"
#include "ecam/metrics.hpp"
#include "support.hpp"

using namespace ecam;

namespace
{

SceneSpec spec_for(Layout layout, std::uint64_t seed)
{
  SceneSpec s;
  s.layout = layout;
  s.width_m = 16.0;
  s.height_m = 16.0;
  s.density = 0.45;
  s.pedestrians = 25;
  s.seed = seed;
  return s;
}

PredictionSet ground_truth_as_predictions(const std::vector<TrajectoryWindow> & windows)
{
  PredictionSet p;
  for (const auto & w : windows) {
    p.samples.push_back({w.future});
  }
  return p;
}

}  // namespace

TEST_CASE("layout names round-trip")
{
  for (const auto l : {Layout::kCorridor, Layout::kRooms, Layout::kRandomBlocks}) {
    CHECK(parse_layout(layout_name(l)) == l);
  }
  CHECK_THROWS_AS(parse_layout("maze"), ValidationError);
}

TEST_CASE("scene specification validation")
{
  SceneSpec s;
  s.density = 0.9;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK_THROWS_AS(generate_map(s), ValidationError);
  s = SceneSpec{};
  s.speed_min = 0.2;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = SceneSpec{};
  s.speed_min = 1.5;
  s.speed_max = 1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = SceneSpec{};
  s.width_m = 0.1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = SceneSpec{};
  s.timestep_s = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK_NOTHROW(SceneSpec{}.validate());
}

TEST_CASE("maps keep at least half of the area connected and walkable")
{
  for (const auto l : {Layout::kCorridor, Layout::kRooms, Layout::kRandomBlocks}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      CAPTURE(layout_name(l));
      const OccupancyMap m = generate_map(spec_for(l, seed));
      CHECK(m.width() == 160);
      CHECK(m.height() == 160);
      CHECK(largest_walkable_fraction(m) >= 0.5);
      std::size_t obstacles = 0;
      for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
          obstacles += m.cell_is_obstacle(r, c) ? 1 : 0;
        }
      }
      CHECK(obstacles > 0);
    }
  }
}

TEST_CASE("obstacle-free scene gives straight constant-speed walks")
{
  SceneSpec s = spec_for(Layout::kRandomBlocks, 4);
  s.density = 0.0;
  s.jitter_m = 0.0;
  const GeneratedScene g = generate_scene(s);
  REQUIRE(g.series.size() == 25);
  for (const auto & series : g.series) {
    const auto & p = series.points;
    REQUIRE(p.size() >= 3);
    const Vec2 dir = (p.back() - p.front()).normalized();
    const double step = (p[1] - p[0]).norm();
    CHECK(step / s.timestep_s >= s.speed_min - 1e-9);
    CHECK(step / s.timestep_s <= s.speed_max + 1e-9);
    for (std::size_t i = 1; i < p.size(); ++i) {
      const Vec2 d = p[i] - p[i - 1];
      CHECK(std::abs(dir.x() * d.y() - dir.y() * d.x()) < 1e-9);
      if (i + 1 < p.size()) {
        CHECK(d.norm() == doctest::Approx(step).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("ground truth never collides and speeds stay within tolerance")
{
  for (const auto l : {Layout::kCorridor, Layout::kRooms, Layout::kRandomBlocks}) {
    CAPTURE(layout_name(l));
    const SceneSpec s = spec_for(l, 7);
    const GeneratedScene g = generate_scene(s);
    CHECK(g.series.size() + static_cast<std::size_t>(g.skipped_pedestrians) == 25);
    CHECK(g.series.size() >= 20);
    for (const auto & series : g.series) {
      CHECK_FALSE(collides(series.points, g.map, true));
      for (std::size_t i = 1; i < series.points.size(); ++i) {
        const double v = (series.points[i] - series.points[i - 1]).norm() / s.timestep_s;
        CHECK(v >= 0.9 * s.speed_min);
        CHECK(v <= 1.1 * s.speed_max);
        CHECK(series.frames[i] - series.frames[i - 1] == s.frame_step);
      }
    }
    REQUIRE_FALSE(g.windows.empty());
    CHECK(ecfl(ground_truth_as_predictions(g.windows), g.map) == 100.0);
  }
}

TEST_CASE("window count matches the sliding-window formula")
{
  const GeneratedScene g = generate_scene(spec_for(Layout::kCorridor, 2));
  std::size_t expected = 0;
  for (const auto & s : g.series) {
    if (s.points.size() >= 20) {
      expected += s.points.size() - 19;
    }
  }
  CHECK(g.windows.size() == expected);
  const GeneratedScene strided = generate_scene(spec_for(Layout::kCorridor, 2), WindowConfig{8, 12, 5});
  CHECK(strided.windows.size() < g.windows.size());
}

TEST_CASE("generation is deterministic in the seed and files are byte-identical")
{
  testing::TempDir a("synth_a");
  testing::TempDir b("synth_b");
  const ManifestEntry ea = write_scene(generate_scene(spec_for(Layout::kRooms, 11)), a.path(), "rooms_0");
  write_scene(generate_scene(spec_for(Layout::kRooms, 11)), b.path(), "rooms_0");
  for (const auto & f : {ea.map, ea.homography, ea.trajectories}) {
    CHECK(testing::read_file(a.path() / f) == testing::read_file(b.path() / f));
  }
  testing::TempDir c("synth_c");
  write_scene(generate_scene(spec_for(Layout::kRooms, 12)), c.path(), "rooms_0");
  CHECK(testing::read_file(a.path() / ea.trajectories) != testing::read_file(c.path() / ea.trajectories));
}

TEST_CASE("written scenes load back unchanged")
{
  testing::TempDir dir("synth_load");
  const GeneratedScene g = generate_scene(spec_for(Layout::kCorridor, 5));
  ManifestEntry e = write_scene(g, dir.path(), "corridor_0");
  e.map = dir.path() / e.map;
  e.homography = dir.path() / e.homography;
  e.trajectories = dir.path() / e.trajectories;
  const Scene s = load_scene(e, WindowConfig{});
  CHECK(s.map.width() == g.map.width());
  CHECK(s.windows.size() == g.windows.size());
  for (int r = 0; r < g.map.height(); ++r) {
    for (int c = 0; c < g.map.width(); ++c) {
      REQUIRE(s.map.cell_is_obstacle(r, c) == g.map.cell_is_obstacle(r, c));
    }
  }
  REQUIRE(s.series.size() == g.series.size());
  CHECK((s.series[0].points[3] - g.series[0].points[3]).norm() < 1e-6);
}
