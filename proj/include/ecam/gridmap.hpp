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

#ifndef ECAM__GRIDMAP_HPP_
#define ECAM__GRIDMAP_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ecam
{

using Vec2 = Eigen::Vector2d;

/// Binary occupancy raster plus a projective world(m) -> pixel mapping.
///
/// Cells are stored row-major; 0 marks an obstacle and 1 walkable space.
/// Pixel coordinates are (u, v) = (column, row) and are floored for lookup,
/// so cell (r, c) covers u in [c, c+1) and v in [r, r+1).
class OccupancyMap
{
public:
  OccupancyMap(int width, int height, std::vector<std::uint8_t> cells,
               const Eigen::Matrix3d & world_to_pixel);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t> & cells() const { return cells_; }
  const Eigen::Matrix3d & homography() const { return h_; }
  const Eigen::Matrix3d & inverse_homography() const { return h_inv_; }

  std::uint8_t cell(int row, int col) const { return cells_[static_cast<std::size_t>(row) * width_ + col]; }
  bool in_bounds(int row, int col) const { return row >= 0 && row < height_ && col >= 0 && col < width_; }
  // Out-of-grid cells count as obstacle.
  bool cell_is_obstacle(int row, int col) const { return !in_bounds(row, col) || cell(row, col) == 0; }

  std::size_t obstacle_count() const;

private:
  int width_;
  int height_;
  std::vector<std::uint8_t> cells_;
  Eigen::Matrix3d h_;
  Eigen::Matrix3d h_inv_;
};

struct ContourPoint
{
  Vec2 position;
};

struct PatchConfig
{
  int size{32};
  double cell_size{0.25};
  double forward_offset{2.0};
};

/// Heading-aligned S x S occupancy sample around a point.
///
/// Patch column index runs along the heading direction and row index along
/// its left normal; at heading 0 a patch is an axis-aligned crop of the map.
struct MapPatch
{
  int size{0};
  std::vector<std::uint8_t> grid;
  Vec2 center{Vec2::Zero()};
  double heading{0.0};
  double cell_size{0.0};

  std::uint8_t at(int row, int col) const { return grid[static_cast<std::size_t>(row) * size + col]; }
};

OccupancyMap load_map(const std::filesystem::path & map_file, const std::filesystem::path & homography_file);

// PGM (P2/P5, maxval <= 255) -> row-major gray values.
struct GrayImage
{
  int width{0};
  int height{0};
  std::vector<std::uint8_t> pixels;
};
GrayImage read_pgm(const std::filesystem::path & file);
Eigen::Matrix3d read_homography(const std::filesystem::path & file);

void write_pgm(const OccupancyMap & map, const std::filesystem::path & file);
void write_homography(const Eigen::Matrix3d & h, const std::filesystem::path & file);

Vec2 world_to_pixel(const OccupancyMap & map, const Vec2 & p);
Vec2 pixel_to_world(const OccupancyMap & map, const Vec2 & pixel);
bool is_obstacle(const OccupancyMap & map, const Vec2 & p);

std::vector<ContourPoint> extract_contours(const OccupancyMap & map);

MapPatch extract_patch(const OccupancyMap & map, const Vec2 & center, double heading,
                       const PatchConfig & cfg);

}  // namespace ecam

#endif  // ECAM__GRIDMAP_HPP_
