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

#ifndef ECAM__VIZ_HPP_
#define ECAM__VIZ_HPP_

#include <span>
#include <string>

#include "ecam/data.hpp"
#include "ecam/gridmap.hpp"
#include "ecam/model.hpp"

namespace ecam
{

struct SvgOptions
{
  // Output pixels per map cell.
  double scale{4.0};
  bool segment_check{false};
};

/// Overlay of windows and sampled futures on the occupancy map, drawn in
/// pixel space. `preds` is either empty or holds one entry per window.
std::string render_svg(const OccupancyMap & map, std::span<const TrajectoryWindow> windows,
                       const PredictionSet & preds, const SvgOptions & opt = {});

}  // namespace ecam

#endif  // ECAM__VIZ_HPP_
