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

#include "ecam/viz.hpp"

#include <cstdio>
#include <sstream>

#include "ecam/errors.hpp"
#include "ecam/losses.hpp"

namespace ecam
{

namespace
{

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void polyline(std::ostringstream & os, const OccupancyMap & map, std::span<const Vec2> pts, double scale,
              const std::string & style)
{
  if (pts.empty()) {
    return;
  }
  os << "<polyline points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 px = world_to_pixel(map, pts[i]) * scale;
    os << (i ? " " : "") << num(px.x()) << ',' << num(px.y());
  }
  os << "\" " << style << "/>\n";
}

}  // namespace

std::string render_svg(const OccupancyMap & map, std::span<const TrajectoryWindow> windows,
                       const PredictionSet & preds, const SvgOptions & opt)
{
  if (!(opt.scale > 0.0)) {
    throw ValidationError("svg scale must be positive");
  }
  if (!preds.samples.empty() && preds.samples.size() != windows.size()) {
    throw ShapeError("prediction set must be empty or match the number of windows");
  }
  const double s = opt.scale;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(map.width() * s) << "\" height=\""
     << num(map.height() * s) << "\" viewBox=\"0 0 " << num(map.width() * s) << ' ' << num(map.height() * s)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(map.width() * s) << "\" height=\"" << num(map.height() * s)
     << "\" fill=\"#ffffff\"/>\n";

  // Obstacles as horizontal runs.
  os << "<g id=\"obstacles\" fill=\"#404040\">\n";
  for (int r = 0; r < map.height(); ++r) {
    int c = 0;
    while (c < map.width()) {
      if (map.cell(r, c) != 0) {
        ++c;
        continue;
      }
      const int start = c;
      while (c < map.width() && map.cell(r, c) == 0) {
        ++c;
      }
      os << "<rect x=\"" << num(start * s) << "\" y=\"" << num(r * s) << "\" width=\"" << num((c - start) * s)
         << "\" height=\"" << num(s) << "\"/>\n";
    }
  }
  os << "</g>\n";

  const CollisionMask mask =
      preds.samples.empty() ? CollisionMask{} : collision_mask(preds, map, opt.segment_check);
  os << "<g id=\"samples\" fill=\"none\">\n";
  for (std::size_t p = 0; p < preds.samples.size(); ++p) {
    for (std::size_t k = 0; k < preds.samples[p].size(); ++k) {
      const bool hit = mask[p][k] != 0;
      polyline(os, map, preds.samples[p][k], s,
               hit ? "stroke=\"#d62728\" stroke-width=\"1.5\" class=\"colliding\""
                   : "stroke=\"#1f77b4\" stroke-width=\"0.6\" stroke-opacity=\"0.7\"");
    }
  }
  os << "</g>\n";

  os << "<g id=\"tracks\" fill=\"none\">\n";
  for (const auto & w : windows) {
    polyline(os, map, w.past, s, "stroke=\"#000000\" stroke-width=\"1.5\"");
    std::vector<Vec2> future;
    if (!w.past.empty()) {
      future.push_back(w.past.back());
    }
    future.insert(future.end(), w.future.begin(), w.future.end());
    polyline(os, map, future, s, "stroke=\"#2ca02c\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"");
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace ecam
