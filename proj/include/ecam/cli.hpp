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

#ifndef ECAM__CLI_HPP_
#define ECAM__CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/data.hpp"
#include "ecam/pretrain.hpp"
#include "ecam/synth.hpp"
#include "ecam/trainer.hpp"

namespace ecam::cli
{

namespace fs = std::filesystem;

struct SynthOptions
{
  SceneSpec spec{};
  int count{1};
  fs::path out_dir{"scenes"};
};

/// Writes `count` scenes (PGM, homography, TSV each) and manifest.json.
Manifest cmd_synth(const SynthOptions & opt);

struct SceneFilter
{
  std::optional<std::string> only;
  std::optional<std::string> exclude;
};

struct TrainOptions
{
  TrainConfig config{};
  fs::path manifest;
  fs::path out_dir{"run"};
  SceneFilter scenes{};
  std::optional<fs::path> resume;
  std::optional<fs::path> patch_encoder;
};

struct TrainOutcome
{
  fs::path checkpoint;
  fs::path log;
  std::vector<LossBreakdown> epochs;
};

/// Trains to `config.epochs`, appending one JSON line per epoch to
/// train_log.jsonl and saving checkpoint.json after every epoch. On a
/// non-finite loss writes divergence.json and rethrows DivergenceError.
TrainOutcome cmd_train(const TrainOptions & opt);

struct EvalOptions
{
  fs::path checkpoint;
  fs::path manifest;
  SceneFilter scenes{};
  int k{20};
  int runs{1};
  std::uint64_t seed{0};
  bool per_scene{false};
};

/// Metrics averaged over `runs` re-samplings, with mean and std per metric.
/// A checkpoint of the form {"format": "ecam-oracle"} predicts the ground truth.
nlohmann::json cmd_eval(const EvalOptions & opt);

struct VizOptions
{
  fs::path checkpoint;
  fs::path manifest;
  fs::path out{"scene.svg"};
  std::optional<std::string> scene;
  // Windows starting at this frame; defaults to the busiest start frame.
  std::optional<int> frame;
  int k{20};
  std::uint64_t seed{0};
  double scale{4.0};
};

std::string cmd_viz(const VizOptions & opt);

/// Ablation table from eval reports that carry an "ablation" field; several
/// reports of the same ablation (e.g. training seeds) are averaged.
std::string cmd_report(const std::vector<fs::path> & eval_files);

struct PretrainOptions
{
  TrainConfig config{};
  PretrainConfig pretrain{};
  fs::path manifest;
  SceneFilter scenes{};
  fs::path out{"patch_encoder.json"};
};

std::vector<double> cmd_pretrain_patch(const PretrainOptions & opt);

struct GradcheckOptions
{
  TrainConfig config{};
  // Uses a small generated corridor scene when empty.
  std::optional<fs::path> manifest;
  std::vector<Ablation> ablations{};
  int batch{4};
  std::uint64_t seed{0};
  double step{1e-5};
  double tolerance{1e-4};
};

struct GradcheckOutcome
{
  std::vector<std::pair<Ablation, GradCheckReport>> reports;
  bool passed{true};
};

GradcheckOutcome cmd_gradcheck(const GradcheckOptions & opt);

/// Small model and scene used by gradcheck when no manifest is given.
TrainConfig gradcheck_fixture_config();
Scene gradcheck_fixture_scene(std::uint64_t seed);

/// Applies "key=value" overrides (value parsed as JSON, else as a string) to
/// a flat config object.
void apply_overrides(nlohmann::json & config, const std::vector<std::string> & overrides);

/// Entry point of the `ecam` tool. Exit codes: 0 success, 1 invalid input,
/// 2 training divergence.
int run(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

}  // namespace ecam::cli

#endif  // ECAM__CLI_HPP_
