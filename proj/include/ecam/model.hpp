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

#ifndef ECAM__MODEL_HPP_
#define ECAM__MODEL_HPP_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/data.hpp"
#include "ecam/gridmap.hpp"
#include "ecam/nn.hpp"
#include "ecam/rng.hpp"

namespace ecam
{

using Trajectory = std::vector<Vec2>;

/// K sampled futures per pedestrian: samples[ped][k][t].
struct PredictionSet
{
  std::vector<std::vector<Trajectory>> samples;

  std::size_t num_pedestrians() const { return samples.size(); }
  std::size_t num_samples() const { return samples.empty() ? 0 : samples.front().size(); }
};

/// Pedestrian-centric frame: origin at the last observed position, +x along
/// the last non-zero displacement (or world +x if the pedestrian never moved).
struct CanonicalFrame
{
  Vec2 origin{Vec2::Zero()};
  double heading{0.0};
  Eigen::Matrix2d rotation{Eigen::Matrix2d::Identity()};  // local -> world

  static CanonicalFrame from_past(std::span<const Vec2> past);

  Vec2 to_local(const Vec2 & world) const { return rotation.transpose() * (world - origin); }
  Vec2 to_world(const Vec2 & local) const { return origin + rotation * local; }
};

struct ModelConfig
{
  int obs_len{8};
  int pred_len{12};
  int hidden{64};
  int history_hidden{64};
  int decoder_hidden{64};
  int noise_dim{8};
  bool use_map{true};
  PatchConfig patch{};

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json & j);
};

// Flattened width of the last conv stage; matches the 64-d map embedding.
constexpr int kMapEmbedDim = 64;

/// Per-window model input, independent of the parameters.
struct WindowInput
{
  CanonicalFrame frame;
  nn::Vector history;  // 2*(obs_len-1) canonical displacements
  nn::Vector patch;    // size*size, 1 = obstacle; empty when the map is unused
};

WindowInput prepare_input(const TrajectoryWindow & window, const OccupancyMap * map, const ModelConfig & cfg);

/// Activations of one batched forward pass, kept for backward.
struct ForwardTrace
{
  int batch{0};
  int k{0};
  std::vector<CanonicalFrame> frames;
  nn::Matrix history_in;    // 2(T_obs-1) x B
  nn::Matrix history_act;   // history_hidden x B
  nn::Matrix h_history;     // H x B
  std::array<nn::Matrix, 4> conv_cols;
  std::array<nn::Matrix, 4> conv_pre;
  nn::Matrix map_features;  // 64 x B
  nn::Matrix map_embedding; // H x B
  nn::Matrix h;             // fused, H x B
  nn::Matrix decoder_in;    // (H + noise) x (B*K), column b*K + k
  nn::Matrix decoder_act;
  nn::Matrix offsets;       // 2*T_pred x (B*K), canonical per-step displacements
  PredictionSet predictions;
};

/// History encoder + heading-aligned map-patch encoder, fused by summation,
/// followed by a noise-conditioned decoder producing K futures.
class Predictor
{
public:
  Predictor() = default;
  Predictor(const ModelConfig & cfg, std::uint64_t seed);

  const ModelConfig & config() const { return cfg_; }

  nn::Vector encode_history(const WindowInput & input) const;
  // Map embedding projected to H; zero when the map is unused.
  nn::Vector encode_map(const WindowInput & input) const;
  nn::Vector fuse(const nn::Vector & h_history, const nn::Vector & map_embedding) const;
  // noise: noise_dim x K
  std::vector<Trajectory> decode_samples(const nn::Vector & h, const nn::Matrix & noise,
                                         const CanonicalFrame & frame) const;
  std::vector<Trajectory> decode_samples(const nn::Vector & h, int k, Rng & rng,
                                         const CanonicalFrame & frame) const;

  std::vector<Trajectory> predict(const WindowInput & input, int k, Rng & rng) const;

  // noise: one noise_dim x K block per window.
  ForwardTrace forward(std::span<const WindowInput> inputs, std::span<const nn::Matrix> noise) const;
  // Accumulates parameter gradients. dh_extra (H x B, may be empty) is any
  // extra gradient arriving at the fused representation.
  void backward(const ForwardTrace & trace, const PredictionSet & dpred, const nn::Matrix & dh_extra);
  // Backward through the conv stack only, from d(loss)/d(map_features).
  void backward_patch_encoder(const ForwardTrace & trace, const nn::Matrix & dfeatures);

  void visit(const nn::ParamVisitor & f);
  void visit(const nn::ConstParamVisitor & f) const;
  void zero_grad();

  nn::Linear history1;
  nn::Linear history2;
  std::array<nn::Conv2d, 4> conv;
  nn::Linear map_proj;
  nn::Linear decoder1;
  nn::Linear decoder2;

private:
  ModelConfig cfg_;
};

nn::Matrix draw_noise(int noise_dim, int k, Rng & rng);

/// Named parameter groups as JSON {name: {rows, cols, data}} with exact
/// round-trip of every double.
nlohmann::json params_to_json(const std::vector<const nn::Param *> & params);
void params_from_json(const nlohmann::json & j, const std::vector<nn::Param *> & params);

nlohmann::json predictor_to_json(const Predictor & model);
Predictor predictor_from_json(const nlohmann::json & j);

// Reads only the predictor group of a checkpoint file.
Predictor load_predictor(const std::filesystem::path & checkpoint);

}  // namespace ecam

#endif  // ECAM__MODEL_HPP_
