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

#include "ecam/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ecam/errors.hpp"
#include "support.hpp"

using namespace ecam;

namespace
{

Trajectory line(Vec2 start, Vec2 step, int n = 12)
{
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    t.push_back(start + step * i);
  }
  return t;
}

}  // namespace

TEST_CASE("ade_fde_min: perfect and constant-offset predictions")
{
  const Trajectory gt = line(Vec2(0, 0), Vec2(0.4, 0.1));
  const std::vector<Trajectory> g{gt};
  PredictionSet exact;
  exact.samples = {{gt, gt}};
  const auto zero = ade_fde_min(exact, g);
  CHECK(zero.ade == 0.0);
  CHECK(zero.fde == 0.0);

  PredictionSet shifted;
  Trajectory off = gt;
  for (auto & p : off) {
    p += Vec2(0.6, 0.8);
  }
  shifted.samples = {{off}};
  const auto d = ade_fde_min(shifted, g);
  CHECK(d.ade == doctest::Approx(1.0));
  CHECK(d.fde == doctest::Approx(1.0));
}

TEST_CASE("ade_fde_min: minima are taken independently")
{
  const Trajectory gt(4, Vec2::Zero());
  const std::vector<Trajectory> g{gt};
  // Sample A: errors 1,1,1,1 (ADE 1, FDE 1). Sample B: 0,0,0,3 (ADE 0.75, FDE 3).
  // Sample C: 2,2,2,0 (ADE 1.5, FDE 0).
  Trajectory a(4, Vec2(1, 0));
  Trajectory b(4, Vec2::Zero());
  b[3] = Vec2(3, 0);
  Trajectory c(4, Vec2(2, 0));
  c[3] = Vec2::Zero();
  PredictionSet p;
  p.samples = {{a, b, c}};
  const auto r = ade_fde_min(p, g);
  // Exhaustive minimum over samples, taken per metric.
  CHECK(r.ade == doctest::Approx(0.75));
  CHECK(r.fde == doctest::Approx(0.0));
  const auto per = ade_fde_min_per_pedestrian(p, g);
  REQUIRE(per.size() == 1);
  CHECK(per[0].ade == r.ade);
}

TEST_CASE("ade_fde_min: duplicates and rigid transforms leave it unchanged")
{
  std::mt19937_64 gen(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Trajectory> gt;
    PredictionSet p;
    for (int i = 0; i < 3; ++i) {
      gt.push_back(line(Vec2(n(gen), n(gen)), Vec2(n(gen), n(gen))));
      std::vector<Trajectory> ks;
      for (int k = 0; k < 5; ++k) {
        Trajectory s = gt.back();
        for (auto & pt : s) {
          pt += Vec2(n(gen), n(gen));
        }
        ks.push_back(s);
      }
      p.samples.push_back(ks);
    }
    const auto base = ade_fde_min(p, gt);

    PredictionSet dup = p;
    dup.samples[1].push_back(dup.samples[1][2]);
    dup.samples[0].push_back(dup.samples[0][0]);
    dup.samples[2].push_back(dup.samples[2][4]);
    CHECK(ade_fde_min(dup, gt).ade == base.ade);

    const double a = n(gen);
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Vec2 shift(n(gen) * 10, n(gen) * 10);
    auto tf = [&](Vec2 & v) { v = rot * v + shift; };
    PredictionSet pt = p;
    std::vector<Trajectory> gt2 = gt;
    for (auto & ped : pt.samples) {
      for (auto & s : ped) {
        std::for_each(s.begin(), s.end(), tf);
      }
    }
    for (auto & s : gt2) {
      std::for_each(s.begin(), s.end(), tf);
    }
    const auto moved = ade_fde_min(pt, gt2);
    CHECK(std::abs(moved.ade - base.ade) < 1e-9);
    CHECK(std::abs(moved.fde - base.fde) < 1e-9);
  }
}

TEST_CASE("ade_fde_min: empty or mismatched input")
{
  CHECK_THROWS_AS(ade_fde_min(PredictionSet{}, std::vector<Trajectory>{}), ValidationError);
  PredictionSet p;
  p.samples = {{Trajectory(3, Vec2::Zero())}};
  CHECK_THROWS(ade_fde_min(p, std::vector<Trajectory>{}));
}

TEST_CASE("ecfl: obstacle-free map and counting")
{
  const auto open = testing::open_map(100, 100);
  PredictionSet p;
  p.samples = {{line(Vec2(1, 1), Vec2(0.5, 0.5)), line(Vec2(2, 1), Vec2(0.5, 0.2))}};
  CHECK(ecfl(p, open) == 100.0);

  const auto wall = testing::map_from_rows({"....", "....", "...#", "...."});
  PredictionSet q;
  q.samples = {{Trajectory{{0.5, 0.5}}, Trajectory{{3.5, 2.5}}, Trajectory{{1.5, 1.5}}, Trajectory{{2.5, 3.5}}}};
  CHECK(count_colliding(q, wall) == 1);
  CHECK(ecfl(q, wall) == 75.0);
}

TEST_CASE("ecfl: equals a brute-force rasterisation oracle and is permutation invariant")
{
  std::mt19937_64 gen(22);
  for (int scene = 0; scene < 30; ++scene) {
    std::bernoulli_distribution coin(0.2);
    std::vector<std::uint8_t> cells(30 * 30);
    for (auto & c : cells) {
      c = coin(gen) ? 0 : 1;
    }
    const OccupancyMap m(30, 30, cells, testing::scale_homography(2.0));
    std::uniform_real_distribution<double> u(-1.0, 16.0);
    std::normal_distribution<double> step(0.0, 0.4);
    PredictionSet p;
    const int n = 1 + static_cast<int>(gen() % 20);
    const int k = 1 + static_cast<int>(gen() % 20);
    std::size_t oracle = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<Trajectory> ks;
      for (int j = 0; j < k; ++j) {
        Trajectory t{Vec2(u(gen), u(gen))};
        for (int s = 1; s < 12; ++s) {
          t.push_back(t.back() + Vec2(step(gen), step(gen)));
        }
        bool hit = false;
        for (const auto & pt : t) {
          const double px = std::floor(pt.x() * 2.0);
          const double py = std::floor(pt.y() * 2.0);
          hit |= px < 0 || py < 0 || px >= 30 || py >= 30 || cells[static_cast<int>(py) * 30 + static_cast<int>(px)] == 0;
        }
        oracle += hit;
        ks.push_back(t);
      }
      p.samples.push_back(ks);
    }
    REQUIRE(count_colliding(p, m) == oracle);
    CHECK(ecfl(p, m) == doctest::Approx(100.0 - 100.0 * static_cast<double>(oracle) / (n * k)));

    PredictionSet perm = p;
    std::shuffle(perm.samples.begin(), perm.samples.end(), gen);
    for (auto & ped : perm.samples) {
      std::shuffle(ped.begin(), ped.end(), gen);
    }
    CHECK(ecfl(perm, m) == ecfl(p, m));
  }
}

TEST_CASE("MetricsAccumulator pools scenes and reports per scene")
{
  const auto open = testing::open_map(100, 100);
  const auto wall = testing::map_from_rows({"#.", ".."});
  const Trajectory gt = line(Vec2(1, 1), Vec2(0.1, 0.1), 3);
  PredictionSet p;
  p.samples = {{gt, gt}};
  const std::vector<Trajectory> g{gt};

  PredictionSet q;
  q.samples = {{Trajectory(3, Vec2(0.5, 0.5)), Trajectory(3, Vec2(1.5, 1.5))}};
  const std::vector<Trajectory> h{Trajectory(3, Vec2(1.5, 1.5))};

  MetricsAccumulator acc;
  acc.add(p, g, open, "a");
  acc.add(q, h, wall, "b");
  const MetricsReport r = acc.report();
  CHECK(r.n_pedestrians == 2);
  CHECK(r.k_samples == 2);
  CHECK(r.ecfl == 75.0);
  CHECK(r.per_scene.at("a").ecfl == 100.0);
  CHECK(r.per_scene.at("b").ecfl == 50.0);
  CHECK(r.ade_min == 0.0);
  const auto j = r.to_json(true);
  CHECK(j.contains("per_scene"));
  CHECK_FALSE(r.to_json(false).contains("per_scene"));
}
