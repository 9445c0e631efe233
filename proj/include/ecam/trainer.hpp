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

#ifndef ECAM__TRAINER_HPP_
#define ECAM__TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/data.hpp"
#include "ecam/errors.hpp"
#include "ecam/losses.hpp"
#include "ecam/metrics.hpp"
#include "ecam/model.hpp"
#include "ecam/nce.hpp"
#include "ecam/sampling.hpp"

namespace ecam
{

/// Ablation rows: which of map conditioning, the collision loss and the
/// contrastive loss are switched on.
enum class Ablation
{
  kBaseline,
  kMap,
  kEnvColLoss,
  kMapNce,
  kEcam,
};

struct AblationFlags
{
  bool use_map{false};
  bool use_env_col_loss{false};
  bool use_map_nce{false};
};

AblationFlags ablation_flags(Ablation a);
Ablation parse_ablation(const std::string & name);
std::string ablation_name(Ablation a);
const std::vector<Ablation> & all_ablations();

struct TrainConfig
{
  ModelConfig model{};
  SamplingConfig sampling{};
  NceConfig nce{};
  Ablation ablation{Ablation::kEcam};
  double lambda_env{1.0};
  double lambda_nce{0.25};
  bool collision_segment_check{false};
  int k_samples{20};
  double lr{1e-3};
  double momentum{0.9};
  // Global gradient-norm clip; 0 disables.
  double grad_clip{0.0};
  int batch_size{32};
  int epochs{10};
  int window_stride{1};
  std::uint64_t seed{0};

  bool use_env_col_loss() const { return ablation_flags(ablation).use_env_col_loss; }
  bool use_map_nce() const { return ablation_flags(ablation).use_map_nce; }
  WindowConfig windows() const { return {model.obs_len, model.pred_len, window_stride}; }

  nlohmann::json to_json() const;
  // Flat key namespace; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json & j);
  // Re-derives model.use_map from the ablation.
  void apply_ablation();
};

/// Windows of one or more scenes with parameter-independent model inputs
/// (canonical history, heading-aligned patches) and contours precomputed.
class TrainingSet
{
public:
  TrainingSet(std::vector<Scene> scenes, const ModelConfig & cfg);

  struct Item
  {
    std::size_t scene{0};
    TrajectoryWindow window;
    WindowInput input;
  };

  std::size_t size() const { return items_.size(); }
  const Item & item(std::size_t i) const { return items_[i]; }
  const Scene & scene(std::size_t i) const { return scenes_[i]; }
  std::size_t num_scenes() const { return scenes_.size(); }
  std::span<const ContourPoint> contours(std::size_t scene) const { return contours_[scene]; }

private:
  std::vector<Scene> scenes_;
  std::vector<std::vector<ContourPoint>> contours_;
  std::vector<Item> items_;
};

/// Thrown when a training step produces a non-finite loss; carries a dump of
/// the offending batch.
class DivergenceError : public NumericError
{
public:
  DivergenceError(const std::string & what, nlohmann::json diagnostic)
  : NumericError(what), diagnostic_(std::move(diagnostic))
  {
  }
  const nlohmann::json & diagnostic() const { return diagnostic_; }

private:
  nlohmann::json diagnostic_;
};

struct ObjectiveResult
{
  LossBreakdown breakdown;
  PredictionSet predictions;
  CollisionMask collisions;
  std::vector<std::size_t> variety_argmin;
  PredictionSet dpred_variety;  // unweighted gradients w.r.t. predictions
  PredictionSet dpred_env;
};

class Trainer
{
public:
  explicit Trainer(const TrainConfig & cfg);

  const TrainConfig & config() const { return cfg_; }
  Predictor & model() { return model_; }
  const Predictor & model() const { return model_; }
  MapNceHead & head() { return head_; }
  std::int64_t step_count() const { return step_; }
  int epoch() const { return epoch_; }
  // Target epoch count, e.g. to extend a resumed run.
  void set_epochs(int epochs) { cfg_.epochs = epochs; }

  /// Forward pass of the full objective on the given batch. Randomness
  /// (decoder noise, contrastive samples) is a pure function of step_seed.
  /// With compute_grads, parameter gradients are zeroed then filled.
  ObjectiveResult objective(const TrainingSet & data, std::span<const std::size_t> batch, std::uint64_t step_seed,
                            bool compute_grads);

  LossBreakdown train_step(const TrainingSet & data, std::span<const std::size_t> batch, std::uint64_t step_seed);

  // One pass over `data` in a seed-determined order; returns the mean breakdown.
  LossBreakdown train_epoch(const TrainingSet & data);

  void visit(const nn::ParamVisitor & f);
  void visit(const nn::ConstParamVisitor & f) const;

  nlohmann::json checkpoint() const;
  static Trainer from_checkpoint(const nlohmann::json & j);
  void save(const std::filesystem::path & file) const;
  static Trainer load(const std::filesystem::path & file);

private:
  void sgd_update();

  TrainConfig cfg_;
  Predictor model_;
  MapNceHead head_;
  std::vector<nn::Matrix> velocity_;
  std::int64_t step_{0};
  int epoch_{0};
};

struct GradCheckReport
{
  double max_rel_error{0.0};
  std::string worst_param;
  std::size_t checked{0};
  // Coordinates whose +-step perturbation flipped a collision gate or argmin.
  std::size_t excluded{0};
  std::vector<std::pair<std::string, double>> per_param;
  ObjectiveResult base;

  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
  nlohmann::json to_json() const;
};

/// Central finite differences of the total objective against the analytic
/// gradient for every parameter coordinate. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckReport check_gradients(Trainer & trainer, const TrainingSet & data, std::span<const std::size_t> batch,
                                std::uint64_t step_seed, double step = 1e-5, double floor = 1e-4);

/// Samples K predictions per window for every scene and scores them.
MetricsReport evaluate(const Predictor & model, const std::vector<Scene> & scenes, int k, std::uint64_t seed);

}  // namespace ecam

#endif  // ECAM__TRAINER_HPP_
