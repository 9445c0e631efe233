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

#include "ecam/gridmap.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ecam/errors.hpp"

namespace ecam
{

namespace
{

constexpr double kMinDeterminant = 1e-12;
constexpr double kMinHomogeneous = 1e-12;
constexpr int kGrayThreshold = 128;

// Reads the next whitespace-delimited PGM header token, skipping '#' comments.
std::string next_header_token(std::istream & in)
{
  std::string token;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
      if (!token.empty()) {
        return token;
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) {
        return token;
      }
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

int parse_header_int(std::istream & in, const std::string & what, const std::filesystem::path & file)
{
  const std::string token = next_header_token(in);
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) {
      throw std::invalid_argument(token);
    }
    return value;
  } catch (const std::exception &) {
    throw FormatError(file.string() + ": bad PGM " + what + " '" + token + "'");
  }
}

}  // namespace

OccupancyMap::OccupancyMap(int width, int height, std::vector<std::uint8_t> cells,
                           const Eigen::Matrix3d & world_to_pixel)
: width_(width), height_(height), cells_(std::move(cells)), h_(world_to_pixel)
{
  if (width_ < 2 || height_ < 2) {
    throw ValidationError("occupancy map must be at least 2x2");
  }
  if (cells_.size() != static_cast<std::size_t>(width_) * height_) {
    throw ValidationError("occupancy map cell count does not match its dimensions");
  }
  for (const auto c : cells_) {
    if (c > 1) {
      throw ValidationError("occupancy map cells must be 0 or 1");
    }
  }
  if (!h_.allFinite() || std::abs(h_.determinant()) <= kMinDeterminant) {
    throw ValidationError("homography is singular (|det| <= 1e-12)");
  }
  h_inv_ = h_.inverse();
}

std::size_t OccupancyMap::obstacle_count() const
{
  std::size_t n = 0;
  for (const auto c : cells_) {
    n += (c == 0);
  }
  return n;
}

GrayImage read_pgm(const std::filesystem::path & file)
{
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open map file " + file.string());
  }
  const std::string magic = next_header_token(in);
  if (magic != "P2" && magic != "P5") {
    throw FormatError(file.string() + ": not a P2/P5 PGM (magic '" + magic + "')");
  }
  GrayImage img;
  img.width = parse_header_int(in, "width", file);
  img.height = parse_header_int(in, "height", file);
  const int maxval = parse_header_int(in, "maxval", file);
  if (img.width <= 0 || img.height <= 0) {
    throw FormatError(file.string() + ": non-positive PGM dimensions");
  }
  if (maxval <= 0 || maxval > 255) {
    throw FormatError(file.string() + ": PGM maxval must be in [1, 255]");
  }
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(count);
  if (magic == "P5") {
    // next_header_token consumed exactly one whitespace byte after maxval.
    in.read(reinterpret_cast<char *>(img.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
      throw FormatError(file.string() + ": truncated P5 raster");
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      int v = 0;
      if (!(in >> v) || v < 0 || v > maxval) {
        throw FormatError(file.string() + ": bad P2 pixel value at index " + std::to_string(i));
      }
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

Eigen::Matrix3d read_homography(const std::filesystem::path & file)
{
  std::ifstream in(file);
  if (!in) {
    throw FormatError("cannot open homography file " + file.string());
  }
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) {
        throw std::invalid_argument(token);
      }
    } catch (const std::exception &) {
      throw FormatError(file.string() + ": non-numeric homography entry '" + token + "'");
    }
  }
  if (values.size() != 9) {
    throw ValidationError(file.string() + ": homography needs 9 numbers, got " +
                          std::to_string(values.size()));
  }
  Eigen::Matrix3d h;
  for (int i = 0; i < 9; ++i) {
    h(i / 3, i % 3) = values[static_cast<std::size_t>(i)];
  }
  return h;
}

OccupancyMap load_map(const std::filesystem::path & map_file, const std::filesystem::path & homography_file)
{
  const GrayImage img = read_pgm(map_file);
  std::vector<std::uint8_t> cells(img.pixels.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i] = img.pixels[i] < kGrayThreshold ? 0 : 1;
  }
  return OccupancyMap(img.width, img.height, std::move(cells), read_homography(homography_file));
}

void write_pgm(const OccupancyMap & map, const std::filesystem::path & file)
{
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw FormatError("cannot write " + file.string());
  }
  out << "P5\n" << map.width() << " " << map.height() << "\n255\n";
  std::vector<char> raster(map.cells().size());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    raster[i] = static_cast<char>(map.cells()[i] ? 255 : 0);
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

void write_homography(const Eigen::Matrix3d & h, const std::filesystem::path & file)
{
  std::ofstream out(file);
  if (!out) {
    throw FormatError("cannot write " + file.string());
  }
  char buf[64];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", h(r, c));
      out << buf << (c == 2 ? "\n" : " ");
    }
  }
}

Vec2 world_to_pixel(const OccupancyMap & map, const Vec2 & p)
{
  const Eigen::Vector3d q = map.homography() * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < kMinHomogeneous) {
    throw ProjectionError("world point projects to infinity");
  }
  return q.head<2>() / q.z();
}

Vec2 pixel_to_world(const OccupancyMap & map, const Vec2 & pixel)
{
  const Eigen::Vector3d q = map.inverse_homography() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  if (std::abs(q.z()) < kMinHomogeneous) {
    throw ProjectionError("pixel projects to infinity");
  }
  return q.head<2>() / q.z();
}

bool is_obstacle(const OccupancyMap & map, const Vec2 & p)
{
  const Vec2 px = world_to_pixel(map, p);
  if (!std::isfinite(px.x()) || !std::isfinite(px.y())) {
    return true;
  }
  // Clamp before the integer cast; anything this far out is off-grid anyway.
  const double u = std::clamp(std::floor(px.x()), -1.0, static_cast<double>(map.width()));
  const double v = std::clamp(std::floor(px.y()), -1.0, static_cast<double>(map.height()));
  return map.cell_is_obstacle(static_cast<int>(v), static_cast<int>(u));
}

std::vector<ContourPoint> extract_contours(const OccupancyMap & map)
{
  std::vector<ContourPoint> out;
  const auto walkable = [&](int r, int c) { return map.in_bounds(r, c) && map.cell(r, c) == 1; };
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      if (map.cell(r, c) != 0) {
        continue;
      }
      if (walkable(r - 1, c) || walkable(r + 1, c) || walkable(r, c - 1) || walkable(r, c + 1)) {
        out.push_back({pixel_to_world(map, Vec2(c + 0.5, r + 0.5))});
      }
    }
  }
  return out;
}

MapPatch extract_patch(const OccupancyMap & map, const Vec2 & center, double heading,
                       const PatchConfig & cfg)
{
  MapPatch patch;
  patch.size = cfg.size;
  patch.heading = heading;
  patch.cell_size = cfg.cell_size;
  const Vec2 along(std::cos(heading), std::sin(heading));
  const Vec2 normal(-along.y(), along.x());
  patch.center = center + cfg.forward_offset * along;
  patch.grid.resize(static_cast<std::size_t>(cfg.size) * cfg.size);
  const double half = 0.5 * (cfg.size - 1);
  for (int r = 0; r < cfg.size; ++r) {
    for (int c = 0; c < cfg.size; ++c) {
      const Vec2 world = patch.center + ((c - half) * cfg.cell_size) * along +
                         ((r - half) * cfg.cell_size) * normal;
      patch.grid[static_cast<std::size_t>(r) * cfg.size + c] = is_obstacle(map, world) ? 0 : 1;
    }
  }
  return patch;
}

}  // namespace ecam
