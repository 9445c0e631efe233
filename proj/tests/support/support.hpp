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

#ifndef ECAM_TESTS__SUPPORT_HPP_
#define ECAM_TESTS__SUPPORT_HPP_

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ecam/gridmap.hpp"

namespace ecam::testing
{

inline OccupancyMap open_map(int w, int h, const Eigen::Matrix3d & hom = Eigen::Matrix3d::Identity())
{
  return OccupancyMap(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1), hom);
}

inline OccupancyMap map_from_rows(const std::vector<std::string> & rows,
                                  const Eigen::Matrix3d & hom = Eigen::Matrix3d::Identity())
{
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<std::uint8_t> cells;
  for (const auto & r : rows) {
    for (const char c : r) {
      cells.push_back(c == '#' ? 0 : 1);
    }
  }
  return OccupancyMap(w, h, std::move(cells), hom);
}

inline Eigen::Matrix3d scale_homography(double s)
{
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = s;
  m(1, 1) = s;
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  explicit TempDir(const std::string & tag)
  {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ecam_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir &) = delete;
  TempDir & operator=(const TempDir &) = delete;

  const std::filesystem::path & path() const { return path_; }
  std::filesystem::path operator/(const std::string & name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path & p, const std::string & text)
{
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path & p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ecam::testing

#endif  // ECAM_TESTS__SUPPORT_HPP_
