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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "ecam/cli.hpp"
#include "ecam/losses.hpp"
#include "ecam/metrics.hpp"
#include "ecam/model.hpp"
#include "ecam/nce.hpp"
#include "ecam/sampling.hpp"
#include "ecam/synth.hpp"
#include "ecam/trainer.hpp"

using namespace ecam;
namespace fs = std::filesystem;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char * f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Outcome
{
  bool pass{false};
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. ECFL against a brute-force rasteriser.

struct OracleMap
{
  int width;
  int height;
  std::vector<std::uint8_t> cells;
  Eigen::Matrix3d h;

  bool point_hits(const Vec2 & p) const
  {
    const double x = h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2);
    const double y = h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2);
    const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
    const double px = x / w;
    const double py = y / w;
    if (!(px >= 0.0 && py >= 0.0 && px < width && py < height)) {
      return true;
    }
    const auto c = static_cast<int>(px);
    const auto r = static_cast<int>(py);
    return cells[static_cast<std::size_t>(r) * width + c] == 0;
  }
};

Outcome ecfl_oracle()
{
  const auto t0 = Clock::now();
  Rng rng(20260101);
  std::size_t samples = 0;
  std::size_t colliding = 0;
  int scene = 0;
  for (std::uint64_t attempt = 0; scene < 100; ++attempt) {
    SceneSpec spec;
    spec.layout = std::array{Layout::kCorridor, Layout::kRooms, Layout::kRandomBlocks}[scene % 3];
    spec.width_m = rng.uniform(8.0, 16.0);
    spec.height_m = rng.uniform(8.0, 16.0);
    spec.density = rng.uniform(0.1, 0.45);
    spec.pedestrians = 12;
    spec.seed = 1000 + attempt;
    const GeneratedScene g = generate_scene(spec);
    if (g.windows.empty()) {
      continue;
    }

    // Re-anchor the map under a random rigid motion plus a mild projective
    // term so that the homography is general.
    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Eigen::Matrix3d motion = Eigen::Matrix3d::Identity();
    motion << std::cos(th), -std::sin(th), rng.uniform(-50, 50), std::sin(th), std::cos(th), rng.uniform(-50, 50), 0,
      0, 1;
    Eigen::Matrix3d h = g.map.homography() * motion.inverse();
    h(2, 0) = rng.uniform(-1e-3, 1e-3);
    h(2, 1) = rng.uniform(-1e-3, 1e-3);
    const OccupancyMap map(g.map.width(), g.map.height(), g.map.cells(), h);
    const OracleMap oracle{g.map.width(), g.map.height(), g.map.cells(), h};

    const std::size_t n = 1 + rng.index(20);
    const std::size_t k = 1 + rng.index(20);
    PredictionSet preds;
    for (std::size_t i = 0; i < n; ++i) {
      const TrajectoryWindow & w = g.windows[rng.index(g.windows.size())];
      const double spread = rng.uniform(0.0, 1.5);
      std::vector<Trajectory> ks;
      for (std::size_t s = 0; s < k; ++s) {
        Trajectory t;
        Vec2 drift = Vec2::Zero();
        for (const auto & p : w.future) {
          drift += spread * Vec2(rng.normal(), rng.normal());
          const Vec2 q = p + drift;
          t.push_back((motion * q.homogeneous()).hnormalized());
        }
        ks.push_back(std::move(t));
      }
      preds.samples.push_back(std::move(ks));
    }

    std::size_t brute = 0;
    for (const auto & ped : preds.samples) {
      for (const auto & s : ped) {
        bool hit = false;
        for (const auto & p : s) {
          hit = hit || oracle.point_hits(p);
        }
        brute += hit ? 1 : 0;
      }
    }
    const std::size_t lib = count_colliding(preds, map);
    const double expected = 100.0 - 100.0 * static_cast<double>(brute) / static_cast<double>(n * k);
    if (lib != brute || ecfl(preds, map) != expected) {
      return {false, "scene " + std::to_string(scene) + ": library " + std::to_string(lib) + " vs oracle " +
                       std::to_string(brute)};
    }
    samples += n * k;
    colliding += brute;
    ++scene;
  }
  const double dt = seconds_since(t0);
  return {dt < 30.0, "100 scenes, " + std::to_string(samples) + " samples, " + std::to_string(colliding) +
                       " colliding, counts identical; " + fmt("%.1f s", dt) + " (limit 30 s)"};
}

// ---------------------------------------------------------------------------
// 2. Closed-form contrastive loss values.

Outcome mapnce_values()
{
  ContrastiveBatch same;
  same.temperature = 0.5;
  same.query = nn::Vector::LinSpaced(16, -1.0, 2.0);
  const nn::Vector key = nn::Vector::LinSpaced(16, 0.3, -0.7);
  same.keys = key.replicate(1, 1 + 10 * 8);
  const double l1 = mapnce_loss(same).loss;
  const double e1 = std::abs(l1 - std::log(81.0));

  ContrastiveBatch two;
  two.temperature = 0.5;
  two.query = nn::Vector(2);
  two.query << 1.0, 0.0;
  two.keys = nn::Matrix(2, 2);
  two.keys << 0.5, 0.0, 0.0, 1.0;  // q.k0 / tau = 1, q.k1 / tau = 0
  const double l2 = mapnce_loss(two).loss;
  const double e2 = std::abs(l2 - std::log1p(std::exp(-1.0)));
  return {e1 < 1e-6 && e2 < 1e-9, "identical keys J=80: |L - ln 81| = " + fmt("%.2e", e1) +
                                     " (tol 1e-6); two-term: |L - ln(1+e^-1)| = " + fmt("%.2e", e2) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------
// 3. Gradient check for all ablations and the variety gradient router.

Outcome gradient_check()
{
  cli::GradcheckOptions opt;
  opt.config = cli::gradcheck_fixture_config();
  opt.batch = 4;
  opt.seed = 0;
  const cli::GradcheckOutcome res = cli::cmd_gradcheck(opt);
  std::ostringstream d;
  bool pass = res.passed && res.reports.size() == 5;
  for (const auto & [a, rep] : res.reports) {
    d << ablation_name(a) << " " << fmt("%.1e", rep.max_rel_error) << ", ";
    pass = pass && rep.max_rel_error < 1e-4;
  }

  // Non-argmin samples get exactly zero variety gradient.
  const TrainConfig cfg = [] {
    TrainConfig c = cli::gradcheck_fixture_config();
    c.ablation = Ablation::kBaseline;
    c.apply_ablation();
    return c;
  }();
  const TrainingSet data({cli::gradcheck_fixture_scene(0)}, cfg.model);
  Trainer trainer(cfg);
  std::vector<std::size_t> batch;
  for (std::size_t i = 0; i < std::min<std::size_t>(8, data.size()); ++i) {
    batch.push_back(i);
  }
  const ObjectiveResult r = trainer.objective(data, batch, 11, true);
  std::size_t nonzero = 0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < r.dpred_variety.samples.size(); ++i) {
    for (std::size_t k = 0; k < r.dpred_variety.samples[i].size(); ++k) {
      if (k == r.variety_argmin[i]) {
        continue;
      }
      ++checked;
      for (const auto & g : r.dpred_variety.samples[i][k]) {
        nonzero += (g.x() != 0.0 || g.y() != 0.0) ? 1 : 0;
      }
    }
  }
  pass = pass && checked > 0 && nonzero == 0;
  d << "max rel err tol 1e-4; " << checked << " non-argmin samples with " << nonzero << " non-zero variety gradients";
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Negative-sample geometry and positive noise scale.

Outcome negative_geometry()
{
  std::vector<ContourPoint> seeds;
  Rng rng(3);
  for (int z = 0; z < 10; ++z) {
    ContourPoint c;
    c.position = Vec2(rng.uniform(-5, 5), rng.uniform(-5, 5));
    seeds.push_back(c);
  }
  const auto negs = expand_negatives(seeds, 0.5, 0.0, rng);
  double dist_err = 0.0;
  double angle_err = 0.0;
  for (std::size_t j = 0; j < negs.size(); ++j) {
    const Vec2 d = negs[j] - seeds[j / 8].position;
    dist_err = std::max(dist_err, std::abs(d.norm() - 0.5));
    const double expected = std::numbers::pi / 4.0 * static_cast<double>(j % 8);
    const double a = std::remainder(std::atan2(d.y(), d.x()) - expected, 2.0 * std::numbers::pi);
    angle_err = std::max(angle_err, std::abs(a));
  }

  const std::vector<Vec2> future(12, Vec2(1.0, -2.0));
  Rng noise(4);
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec2 e = draw_positive(future, 5, 0.05, noise) - future[4];
    sx += e.x();
    sy += e.y();
    sxx += e.x() * e.x();
    syy += e.y() * e.y();
  }
  const double std_x = std::sqrt((sxx - sx * sx / n) / (n - 1));
  const double std_y = std::sqrt((syy - sy * sy / n) / (n - 1));
  const bool pass = negs.size() == 80 && dist_err < 1e-12 && angle_err < 1e-12 && std_x >= 0.049 &&
                    std_x <= 0.051 && std_y >= 0.049 && std_y <= 0.051;
  return {pass, std::to_string(negs.size()) + " negatives, max |d - 0.5| = " + fmt("%.1e", dist_err) +
                  ", max angle err = " + fmt("%.1e", angle_err) + "; positive noise std x=" + fmt("%.5f", std_x) +
                  " y=" + fmt("%.5f", std_y) + " (band [0.049, 0.051])"};
}

// ---------------------------------------------------------------------------
// 5 and 6. Corridor benchmark.

struct BenchRow
{
  double collision_pct{0.0};
  double ade{0.0};
};

struct Bench
{
  std::map<Ablation, BenchRow> rows;
  std::size_t train_windows{0};
  std::size_t test_windows{0};
  double seconds{0.0};
  Predictor map_model{ModelConfig{}, 0};
  Predictor ecam_model{ModelConfig{}, 0};
  std::optional<Scene> test;
};

Bench run_benchmark()
{
  const auto t0 = Clock::now();
  SceneSpec spec;
  spec.layout = Layout::kCorridor;
  spec.width_m = 16.0;
  spec.height_m = 16.0;
  spec.density = 0.5;
  spec.pedestrians = 480;
  spec.seed = 100;
  const GeneratedScene train = generate_scene(spec);
  spec.pedestrians = 240;
  spec.seed = 200;
  const GeneratedScene test = generate_scene(spec);

  Bench b;
  b.test.emplace(Scene{"test", test.map, test.series, test.windows});
  const std::vector<Scene> train_scenes{Scene{"train", train.map, train.series, train.windows}};
  b.train_windows = train.windows.size();
  b.test_windows = test.windows.size();
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (const auto a : all_ablations()) {
    BenchRow row;
    for (const auto seed : seeds) {
      TrainConfig cfg;
      cfg.ablation = a;
      cfg.apply_ablation();
      cfg.epochs = 10;
      cfg.seed = seed;
      const TrainingSet data(train_scenes, cfg.model);
      Trainer trainer(cfg);
      while (trainer.epoch() < cfg.epochs) {
        trainer.train_epoch(data);
      }
      const MetricsReport m = evaluate(trainer.model(), {*b.test}, 20, 99);
      row.collision_pct += (100.0 - m.ecfl) / static_cast<double>(seeds.size());
      row.ade += m.ade_min / static_cast<double>(seeds.size());
      if (seed == 1 && a == Ablation::kMap) {
        b.map_model = trainer.model();
      }
      if (seed == 1 && a == Ablation::kEcam) {
        b.ecam_model = trainer.model();
      }
    }
    b.rows[a] = row;
  }
  b.seconds = seconds_since(t0);
  return b;
}

Outcome collision_reduction(const Bench & b)
{
  const BenchRow & base = b.rows.at(Ablation::kBaseline);
  const BenchRow & full = b.rows.at(Ablation::kEcam);
  const double reduction = 1.0 - full.collision_pct / base.collision_pct;
  const double ade_change = full.ade / base.ade - 1.0;
  const bool pass = reduction >= 0.30 && ade_change <= 0.25 && b.seconds < 900.0;
  return {pass, std::to_string(b.train_windows) + " train / " + std::to_string(b.test_windows) +
                  " test windows, 3 seeds: collision% " + fmt("%.3f", base.collision_pct) + " -> " +
                  fmt("%.3f", full.collision_pct) + " (" + fmt("%+.1f", -100.0 * reduction) +
                  "%, need <= -30%), ADE_min " + fmt("%.4f", base.ade) + " -> " + fmt("%.4f", full.ade) + " (" +
                  fmt("%+.1f", 100.0 * ade_change) + "%, need <= +25%); benchmark " + fmt("%.0f s", b.seconds) +
                  " (limit 900 s)"};
}

Outcome ablation_order(const Bench & b)
{
  const std::vector<Ablation> chain{Ablation::kEcam, Ablation::kEnvColLoss, Ablation::kMapNce, Ablation::kBaseline};
  bool pass = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const double c = b.rows.at(chain[i]).collision_pct;
    d << ablation_name(chain[i]) << " " << fmt("%.3f", c);
    if (i + 1 < chain.size()) {
      const double next = b.rows.at(chain[i + 1]).collision_pct;
      const bool ok = c <= next + 0.5;
      pass = pass && ok;
      d << (c <= next ? " <= " : (ok ? " ~ " : " > "));
    }
  }
  d << " (collision %, 3-seed mean; '~' = within the 0.5 pp tie allowance); map-only row "
    << fmt("%.3f", b.rows.at(Ablation::kMap).collision_pct) << "; ADE_min";
  for (const auto a : all_ablations()) {
    d << " " << ablation_name(a) << " " << fmt("%.4f", b.rows.at(a).ade);
  }
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 7. Inference path.

Outcome inference_path(const Bench & b)
{
  std::string symbols;
  {
    const std::string cmd = std::string(ECAM_NM) + " -C --defined-only " + ECAM_INFERENCE_BIN;
    FILE * pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
      return {false, "cannot run nm"};
    }
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) {
      symbols += buf.data();
    }
    if (pclose(pipe) != 0) {
      return {false, "nm failed on " + std::string(ECAM_INFERENCE_BIN)};
    }
  }
  for (const char * s : {"ecam::build_sample_set", "ecam::expand_negatives", "ecam::MapNceHead", "ecam::mapnce_loss",
                         "ecam::env_collision_loss", "ecam::variety_loss", "ecam::collision_mask", "ecam::Trainer"}) {
    if (symbols.find(s) != std::string::npos) {
      return {false, "inference binary contains " + std::string(s)};
    }
  }
  if (symbols.find("ecam::Predictor::predict") == std::string::npos) {
    return {false, "inference binary lacks Predictor::predict"};
  }

  std::vector<WindowInput> inputs;
  for (const auto & w : b.test->windows) {
    inputs.push_back(prepare_input(w, &b.test->map, b.map_model.config()));
  }
  const auto time_once = [&](const Predictor & m) {
    Rng rng(1);
    const auto t0 = Clock::now();
    for (const auto & in : inputs) {
      m.predict(in, 20, rng);
    }
    return seconds_since(t0) / static_cast<double>(inputs.size());
  };
  time_once(b.map_model);
  time_once(b.ecam_model);
  double a = 1e30;
  double e = 1e30;
  for (int rep = 0; rep < 7; ++rep) {
    a = std::min(a, time_once(b.map_model));
    e = std::min(e, time_once(b.ecam_model));
  }
  const double ratio = e / a;
  const bool same_arch = b.map_model.config().to_json() == b.ecam_model.config().to_json();
  return {same_arch && ratio > 0.8 && ratio < 1.25,
          "inference binary links map+data+model only, no sampling/contrastive/loss symbols; per-window latency "
          "map-only " +
            fmt("%.1f us", a * 1e6) + " vs ECAM-trained " + fmt("%.1f us", e * 1e6) + " (ratio " + fmt("%.3f", ratio) +
            ", same architecture and code path)"};
}

// ---------------------------------------------------------------------------
// 8. Determinism across processes.

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string & args)
{
  const std::string cmd = std::string(ECAM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome determinism()
{
  const fs::path root = fs::temp_directory_path() / ("ecam_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  const std::string synth =
    "synth --seed 7 --count 2 --width 14 --height 14 --pedestrians 30 --out ";
  bool ok = cli(synth + (root / "s1").string()) == 0 && cli(synth + (root / "s2").string()) == 0;
  std::size_t files = 0;
  for (const auto & e : fs::directory_iterator(root / "s1")) {
    ok = ok && slurp(e.path()) == slurp(root / "s2" / e.path().filename());
    ++files;
  }
  const std::string train = "train --seed 7 --epochs 2 --k 8 --manifest " + (root / "s1" / "manifest.json").string() +
                            " --out ";
  ok = ok && cli(train + (root / "t1").string()) == 0 && cli(train + (root / "t2").string()) == 0;
  const bool ckpt = ok && slurp(root / "t1" / "checkpoint.json") == slurp(root / "t2" / "checkpoint.json");
  const bool log = ok && slurp(root / "t1" / "train_log.jsonl") == slurp(root / "t2" / "train_log.jsonl");
  const std::size_t ckpt_bytes = ok ? fs::file_size(root / "t1" / "checkpoint.json") : 0;
  fs::remove_all(root);
  return {ok && ckpt && log && files == 7,
          "synth --seed 7: " + std::to_string(files) + " files byte-identical; train --seed 7: checkpoint (" +
            std::to_string(ckpt_bytes) + " bytes) and loss log bit-identical across two processes"};
}

// ---------------------------------------------------------------------------
// 9. Ground truth scores perfectly.

Outcome metric_sanity()
{
  std::size_t peds = 0;
  bool pass = true;
  for (const auto layout : {Layout::kCorridor, Layout::kRooms, Layout::kRandomBlocks}) {
    SceneSpec spec;
    spec.layout = layout;
    spec.pedestrians = 40;
    spec.seed = 9;
    const GeneratedScene g = generate_scene(spec);
    PredictionSet preds;
    std::vector<Trajectory> gt;
    for (const auto & w : g.windows) {
      preds.samples.push_back({w.future});
      gt.push_back(w.future);
    }
    const AdeFde e = ade_fde_min(preds, gt);
    pass = pass && e.ade == 0.0 && e.fde == 0.0 && ecfl(preds, g.map) == 100.0;
    peds += gt.size();
  }
  return {pass, std::to_string(peds) + " ground-truth windows over 3 layouts as K=1 predictions: ADE=0, FDE=0, "
                                       "ECFL=100.0 exactly"};
}

}  // namespace

int main()
{
  int failures = 0;
  const auto report = [&](int id, const std::string & name, const std::function<Outcome()> & f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  report(1, "ECFL matches brute-force rasterisation", ecfl_oracle);
  report(2, "MapNCE closed-form values", mapnce_values);
  report(3, "gradient check, all ablations", gradient_check);
  report(4, "negative-sample geometry and noise scale", negative_geometry);

  std::optional<Bench> bench;
  std::string bench_error;
  try {
    bench.emplace(run_benchmark());
  } catch (const std::exception & e) {
    bench_error = e.what();
  }
  const auto with_bench = [&](const std::function<Outcome(const Bench &)> & f) {
    return [&, f]() -> Outcome {
      if (!bench_error.empty()) {
        return {false, "benchmark failed: " + bench_error};
      }
      return f(*bench);
    };
  };
  report(5, "collision reduction on the corridor benchmark", with_bench(collision_reduction));
  report(6, "ablation ordering", with_bench(ablation_order));
  report(7, "zero-overhead inference", with_bench(inference_path));
  report(8, "determinism", determinism);
  report(9, "metric sanity on ground truth", metric_sanity);

  std::cout << (failures == 0 ? "all 9 criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
