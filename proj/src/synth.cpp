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

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "ecam/errors.hpp"
#include "ecam/rng.hpp"

namespace ecam
{

namespace
{

constexpr int kMaxAttempts = 50;
constexpr double kJitterCorrelation = 0.9;
constexpr double kSpeedTolerance = 0.1;
constexpr double kMinGoalFraction = 0.4;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Grid
{
  int width{0};
  int height{0};
  std::vector<std::uint8_t> cells;  // 1 = walkable

  bool walkable(int r, int c) const
  {
    return r >= 0 && r < height && c >= 0 && c < width && cells[static_cast<std::size_t>(r) * width + c];
  }
  std::uint8_t & at(int r, int c) { return cells[static_cast<std::size_t>(r) * width + c]; }
};

double obstacle_fraction(const Grid & g)
{
  std::size_t n = 0;
  for (const auto c : g.cells) {
    n += c == 0;
  }
  return static_cast<double>(n) / static_cast<double>(g.cells.size());
}

std::size_t largest_component(const Grid & g, std::vector<int> * labels_out = nullptr, int * best_label = nullptr)
{
  std::vector<int> labels(g.cells.size(), -1);
  std::size_t best = 0;
  int best_id = -1;
  int next = 0;
  std::vector<int> stack;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * g.width + c;
      if (!g.cells[idx] || labels[idx] >= 0) {
        continue;
      }
      std::size_t size = 0;
      labels[idx] = next;
      stack.assign(1, static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++size;
        const int cr = cur / g.width;
        const int cc = cur % g.width;
        const int nr[4] = {cr - 1, cr + 1, cr, cr};
        const int nc[4] = {cc, cc, cc - 1, cc + 1};
        for (int k = 0; k < 4; ++k) {
          if (g.walkable(nr[k], nc[k])) {
            const std::size_t ni = static_cast<std::size_t>(nr[k]) * g.width + nc[k];
            if (labels[ni] < 0) {
              labels[ni] = next;
              stack.push_back(static_cast<int>(ni));
            }
          }
        }
      }
      if (size > best) {
        best = size;
        best_id = next;
      }
      ++next;
    }
  }
  if (labels_out) {
    *labels_out = std::move(labels);
  }
  if (best_label) {
    *best_label = best_id;
  }
  return best;
}

void fill_rect(Grid & g, int r0, int c0, int r1, int c1, std::uint8_t v)
{
  for (int r = std::max(0, r0); r < std::min(g.height, r1); ++r) {
    for (int c = std::max(0, c0); c < std::min(g.width, c1); ++c) {
      g.at(r, c) = v;
    }
  }
}

// Obstacles grown by `r` cells in each direction.
Grid dilate(const Grid & g, int r)
{
  Grid out = g;
  for (int row = 0; row < g.height; ++row) {
    for (int col = 0; col < g.width; ++col) {
      if (!g.cells[static_cast<std::size_t>(row) * g.width + col]) {
        fill_rect(out, row - r, col - r, row + r + 1, col + r + 1, 0);
      }
    }
  }
  return out;
}

// Adds random rectangles until the obstacle fraction reaches `density`.
// A block is rejected if it splits the walkable space, or if, with all
// obstacles grown by `half_gap` cells, it cuts off space that was reachable
// through passages at least 2 * half_gap wide.
void add_random_blocks(Grid & g, double density, double mpp, int half_gap, Rng & rng)
{
  const double min_side = 1.0 / mpp;
  const double max_side = 4.0 / mpp;
  Grid grown = dilate(g, half_gap);
  std::size_t reachable = largest_component(grown);
  for (int attempt = 0; attempt < 4000 && obstacle_fraction(g) < density; ++attempt) {
    const int h = static_cast<int>(rng.uniform(min_side, max_side));
    const int w = static_cast<int>(rng.uniform(min_side, max_side));
    const int r0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, g.height - h))));
    const int c0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, g.width - w))));
    Grid trial = grown;
    fill_rect(trial, r0 - half_gap, c0 - half_gap, r0 + h + half_gap, c0 + w + half_gap, 0);
    std::size_t filled = 0;
    for (std::size_t i = 0; i < trial.cells.size(); ++i) {
      filled += grown.cells[i] && !trial.cells[i];
    }
    const std::size_t after = largest_component(trial);
    if (after == 0 || after + filled < reachable) {
      continue;
    }
    Grid raw = g;
    fill_rect(raw, r0, c0, r0 + h, c0 + w, 0);
    std::size_t walkable = 0;
    for (const auto c : raw.cells) {
      walkable += c;
    }
    if (walkable == 0 || largest_component(raw) != walkable) {
      continue;
    }
    grown = std::move(trial);
    reachable = after;
    g = std::move(raw);
  }
}

// Exact squared Euclidean distance transform along one dimension.
void edt_1d(const std::vector<double> & f, std::vector<double> & d)
{
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      k = 0;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  d.assign(static_cast<std::size_t>(n), 0.0);
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) {
      ++k;
    }
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = static_cast<double>(q - p) * (q - p) + f[static_cast<std::size_t>(p)];
  }
}

// Distance (pixels) from each cell centre to the nearest obstacle cell centre;
// the area outside the map counts as obstacle.
std::vector<double> clearance_pixels(const OccupancyMap & map)
{
  const int w = map.width() + 2;
  const int h = map.height() + 2;
  const double big = 1e20;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      grid[static_cast<std::size_t>(r + 1) * w + c + 1] = map.cell(r, c) ? big : 0.0;
    }
  }
  std::vector<double> f;
  std::vector<double> d;
  for (int c = 0; c < w; ++c) {
    f.resize(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) {
      f[static_cast<std::size_t>(r)] = grid[static_cast<std::size_t>(r) * w + c];
    }
    edt_1d(f, d);
    for (int r = 0; r < h; ++r) {
      grid[static_cast<std::size_t>(r) * w + c] = d[static_cast<std::size_t>(r)];
    }
  }
  for (int r = 0; r < h; ++r) {
    f.assign(grid.begin() + static_cast<std::ptrdiff_t>(r) * w, grid.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
    edt_1d(f, d);
    std::copy(d.begin(), d.end(), grid.begin() + static_cast<std::ptrdiff_t>(r) * w);
  }
  std::vector<double> out(static_cast<std::size_t>(map.width()) * map.height());
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      out[static_cast<std::size_t>(r) * map.width() + c] = std::sqrt(grid[static_cast<std::size_t>(r + 1) * w + c + 1]);
    }
  }
  return out;
}

// Cells crossed by the segment between two cell centres are all feasible.
bool line_of_sight(const Grid & feasible, int r0, int c0, int r1, int c1)
{
  const int steps = 2 * std::max(std::abs(r1 - r0), std::abs(c1 - c0)) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double r = r0 + 0.5 + t * (r1 - r0);
    const double c = c0 + 0.5 + t * (c1 - c0);
    // Test the cells on both sides when the sample sits on a cell boundary.
    for (const double dr : {-1e-6, 1e-6}) {
      for (const double dc : {-1e-6, 1e-6}) {
        if (!feasible.walkable(static_cast<int>(std::floor(r + dr)), static_cast<int>(std::floor(c + dc)))) {
          return false;
        }
      }
    }
  }
  return true;
}

std::vector<int> shortest_path(const Grid & feasible, int start, int goal)
{
  const int w = feasible.width;
  const std::size_t n = feasible.cells.size();
  std::vector<double> dist(n, kInf);
  std::vector<int> parent(n, -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  dist[static_cast<std::size_t>(start)] = 0.0;
  open.push({0.0, start});
  constexpr int dr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  constexpr int dc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  const double diag = std::sqrt(2.0);
  while (!open.empty()) {
    const auto [d, cur] = open.top();
    open.pop();
    if (d > dist[static_cast<std::size_t>(cur)]) {
      continue;
    }
    if (cur == goal) {
      break;
    }
    const int r = cur / w;
    const int c = cur % w;
    for (int k = 0; k < 8; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (!feasible.walkable(nr, nc)) {
        continue;
      }
      if (k >= 4 && (!feasible.walkable(r, nc) || !feasible.walkable(nr, c))) {
        continue;
      }
      const int ni = nr * w + nc;
      const double nd = d + (k >= 4 ? diag : 1.0);
      if (nd < dist[static_cast<std::size_t>(ni)]) {
        dist[static_cast<std::size_t>(ni)] = nd;
        parent[static_cast<std::size_t>(ni)] = cur;
        open.push({nd, ni});
      }
    }
  }
  std::vector<int> path;
  if (dist[static_cast<std::size_t>(goal)] == kInf) {
    return path;
  }
  for (int cur = goal; cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
    path.push_back(cur);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> shortcut(const Grid & feasible, const std::vector<int> & path)
{
  const int w = feasible.width;
  std::vector<int> out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = i + 1;
    while (j + 1 < path.size() &&
           line_of_sight(feasible, path[i] / w, path[i] % w, path[j + 1] / w, path[j + 1] % w))
    {
      ++j;
    }
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

// Points along the polyline whose consecutive Euclidean spacing is exactly `step`.
std::vector<Vec2> resample_constant_chord(const std::vector<Vec2> & poly, double step)
{
  std::vector<Vec2> out{poly.front()};
  std::size_t seg = 0;
  double t_start = 0.0;
  while (seg + 1 < poly.size()) {
    const Vec2 & cur = out.back();
    bool found = false;
    for (std::size_t s = seg; s + 1 < poly.size() && !found; ++s) {
      const Vec2 a = poly[s];
      const Vec2 d = poly[s + 1] - a;
      const double lo = s == seg ? t_start : 0.0;
      // |a + t d - cur|^2 = step^2
      const Vec2 e = a - cur;
      const double qa = d.squaredNorm();
      if (qa <= 0.0) {
        continue;
      }
      const double qb = 2.0 * d.dot(e);
      const double qc = e.squaredNorm() - step * step;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) {
        continue;
      }
      const double sq = std::sqrt(disc);
      for (const double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
        if (t >= lo - 1e-12 && t <= 1.0 && !found) {
          out.push_back(a + t * d);
          seg = s;
          t_start = t;
          found = true;
        }
      }
    }
    if (!found) {
      break;
    }
  }
  return out;
}

}  // namespace

Layout parse_layout(const std::string & name)
{
  if (name == "corridor") {
    return Layout::kCorridor;
  }
  if (name == "rooms") {
    return Layout::kRooms;
  }
  if (name == "random-blocks") {
    return Layout::kRandomBlocks;
  }
  throw ValidationError("unknown layout '" + name + "' (corridor|rooms|random-blocks)");
}

std::string layout_name(Layout layout)
{
  switch (layout) {
    case Layout::kCorridor:
      return "corridor";
    case Layout::kRooms:
      return "rooms";
    case Layout::kRandomBlocks:
      return "random-blocks";
  }
  return "?";
}

void SceneSpec::validate() const
{
  if (!(density >= 0.0 && density <= 0.5)) {
    throw ValidationError("density must be in [0, 0.5] so that >= 50% of the map stays walkable");
  }
  if (!(speed_min >= 0.5 && speed_max <= 2.0 && speed_min <= speed_max)) {
    throw ValidationError("speed range must lie within [0.5, 2.0] m/s");
  }
  if (!(meters_per_pixel > 0.0) || width_m / meters_per_pixel < 2.0 || height_m / meters_per_pixel < 2.0) {
    throw ValidationError("map must be at least 2x2 pixels");
  }
  if (pedestrians < 0 || !(timestep_s > 0.0) || clearance_m < 0.0 || jitter_m < 0.0 || frame_step < 1) {
    throw ValidationError("invalid scene specification");
  }
}

double largest_walkable_fraction(const OccupancyMap & map)
{
  Grid g{map.width(), map.height(), map.cells()};
  return static_cast<double>(largest_component(g)) / static_cast<double>(g.cells.size());
}

OccupancyMap generate_map(const SceneSpec & spec)
{
  spec.validate();
  const int w = static_cast<int>(std::lround(spec.width_m / spec.meters_per_pixel));
  const int h = static_cast<int>(std::lround(spec.height_m / spec.meters_per_pixel));
  Grid g{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1)};
  Rng rng = make_stream(spec.seed, Stream::kScene, 0);
  const int half_gap = static_cast<int>(std::ceil(spec.clearance_m / spec.meters_per_pixel));
  switch (spec.layout) {
    case Layout::kCorridor: {
      // Walkable fraction of a plus junction with arm fraction a is 1 - (1-a)^2.
      const double a = 1.0 - std::sqrt(spec.density);
      const int arm_w = std::min(w, static_cast<int>(std::ceil(a * w)));
      const int arm_h = std::min(h, static_cast<int>(std::ceil(a * h)));
      const int c0 = (w - arm_w) / 2;
      const int r0 = (h - arm_h) / 2;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const bool in_vertical = c >= c0 && c < c0 + arm_w;
          const bool in_horizontal = r >= r0 && r < r0 + arm_h;
          g.at(r, c) = (in_vertical || in_horizontal) ? 1 : 0;
        }
      }
      break;
    }
    case Layout::kRooms: {
      const int wall = std::max(1, static_cast<int>(std::lround(0.4 / spec.meters_per_pixel)));
      const int door = std::max(2, static_cast<int>(std::lround(2.0 / spec.meters_per_pixel)));
      if (spec.density > 0.0) {
        for (int i = 1; i < 3; ++i) {
          const int cx = i * w / 3;
          const int ry = i * h / 3;
          fill_rect(g, 0, cx - wall / 2, h, cx - wall / 2 + wall, 0);
          fill_rect(g, ry - wall / 2, 0, ry - wall / 2 + wall, w, 0);
        }
        for (int i = 1; i < 3; ++i) {
          const int cx = i * w / 3;
          const int ry = i * h / 3;
          for (int j = 0; j < 3; ++j) {
            const int mid_r = (2 * j + 1) * h / 6;
            const int mid_c = (2 * j + 1) * w / 6;
            fill_rect(g, mid_r - door / 2, cx - wall, mid_r - door / 2 + door, cx + wall, 1);
            fill_rect(g, ry - wall, mid_c - door / 2, ry + wall, mid_c - door / 2 + door, 1);
          }
        }
      }
      add_random_blocks(g, spec.density, spec.meters_per_pixel, half_gap, rng);
      break;
    }
    case Layout::kRandomBlocks:
      add_random_blocks(g, spec.density, spec.meters_per_pixel, half_gap, rng);
      break;
  }
  Eigen::Matrix3d hom = Eigen::Matrix3d::Identity();
  hom(0, 0) = 1.0 / spec.meters_per_pixel;
  hom(1, 1) = 1.0 / spec.meters_per_pixel;
  OccupancyMap map(w, h, std::move(g.cells), hom);
  if (largest_walkable_fraction(map) < 0.5) {
    throw ValidationError("generated layout leaves less than 50% connected walkable area");
  }
  return map;
}

GeneratedScene populate_scene(const OccupancyMap & map, const SceneSpec & spec, const WindowConfig & windows)
{
  spec.validate();
  const int w = map.width();
  const int h = map.height();
  const double mpp = spec.meters_per_pixel;
  const std::vector<double> clearance = clearance_pixels(map);

  // Cells whose centre keeps the target clearance from every obstacle edge,
  // relaxed if the layout admits none.
  Grid feasible{w, h, std::vector<std::uint8_t>(clearance.size(), 0)};
  double target = spec.clearance_m;
  for (int relax = 0; relax < 8; ++relax, target *= 0.5) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < clearance.size(); ++i) {
      feasible.cells[i] = (clearance[i] - 0.5) * mpp >= target ? 1 : 0;
      count += feasible.cells[i];
    }
    if (count > 0) {
      break;
    }
  }
  std::vector<int> labels;
  int main_label = -1;
  largest_component(feasible, &labels, &main_label);
  std::vector<int> candidates;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == main_label && main_label >= 0) {
      candidates.push_back(static_cast<int>(i));
    }
  }

  GeneratedScene out{map, {}, {}, 0};
  if (candidates.empty()) {
    out.skipped_pedestrians = spec.pedestrians;
    return out;
  }
  const double min_goal_px = kMinGoalFraction * std::min(w, h);
  const auto centre = [&](int idx) { return pixel_to_world(map, Vec2(idx % w + 0.5, idx / w + 0.5)); };

  for (int ped = 0; ped < spec.pedestrians; ++ped) {
    Rng rng = make_stream(spec.seed, Stream::kScene, 1000 + static_cast<std::uint64_t>(ped));
    std::vector<int> path;
    for (int attempt = 0; attempt < kMaxAttempts && path.empty(); ++attempt) {
      const int start = candidates[rng.index(candidates.size())];
      const int goal = candidates[rng.index(candidates.size())];
      const double sep = std::hypot(start % w - goal % w, start / w - goal / w);
      if (sep < min_goal_px) {
        continue;
      }
      path = shortest_path(feasible, start, goal);
    }
    if (path.size() < 2) {
      ++out.skipped_pedestrians;
      continue;
    }
    std::vector<Vec2> poly;
    for (const int idx : shortcut(feasible, path)) {
      poly.push_back(centre(idx));
    }
    const double speed = rng.uniform(spec.speed_min, spec.speed_max);
    const std::vector<Vec2> base = resample_constant_chord(poly, speed * spec.timestep_s);
    if (base.size() < 2) {
      ++out.skipped_pedestrians;
      continue;
    }

    std::vector<Vec2> pts = base;
    double offset = 0.0;
    const double innovation = std::sqrt(1.0 - kJitterCorrelation * kJitterCorrelation) * spec.jitter_m;
    for (std::size_t i = 0; i < base.size(); ++i) {
      offset = kJitterCorrelation * offset + innovation * rng.normal();
      const Vec2 tangent = base[std::min(i + 1, base.size() - 1)] - base[i == 0 ? 0 : i - 1];
      if (tangent.norm() <= 0.0) {
        continue;
      }
      const Vec2 normal = Vec2(-tangent.y(), tangent.x()).normalized();
      const Vec2 q = base[i] + offset * normal;
      const Vec2 px = world_to_pixel(map, q);
      const int r = static_cast<int>(std::floor(px.y()));
      const int c = static_cast<int>(std::floor(px.x()));
      if (feasible.walkable(r, c)) {
        pts[i] = q;
      }
    }
    const double lo = spec.speed_min * (1.0 - kSpeedTolerance);
    const double hi = spec.speed_max * (1.0 + kSpeedTolerance);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double v = (pts[i] - pts[i - 1]).norm() / spec.timestep_s;
      if (v < lo || v > hi) {
        pts = base;
        break;
      }
    }

    Series s;
    s.ped_id = ped + 1;
    const int start_frame = static_cast<int>(rng.index(100)) * spec.frame_step;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s.frames.push_back(start_frame + static_cast<int>(i) * spec.frame_step);
      s.points.push_back(pts[i]);
    }
    out.series.push_back(std::move(s));
  }
  out.windows = make_windows(out.series, windows, layout_name(spec.layout));
  return out;
}

GeneratedScene generate_scene(const SceneSpec & spec, const WindowConfig & windows)
{
  return populate_scene(generate_map(spec), spec, windows);
}

ManifestEntry write_scene(const GeneratedScene & scene, const std::filesystem::path & dir, const std::string & stem)
{
  std::filesystem::create_directories(dir);
  ManifestEntry e;
  e.label = stem;
  e.map = stem + ".pgm";
  e.homography = stem + "_H.txt";
  e.trajectories = stem + ".tsv";
  write_pgm(scene.map, dir / e.map);
  write_homography(scene.map.homography(), dir / e.homography);
  write_trajectories(scene.series, dir / e.trajectories);
  return e;
}

}  // namespace ecam
