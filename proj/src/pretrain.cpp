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

#include "ecam/pretrain.hpp"

#include <algorithm>
#include <numeric>

#include "ecam/errors.hpp"
#include "ecam/rng.hpp"

namespace ecam
{

namespace
{

constexpr const char * kEncoderFormat = "ecam-patch-encoder";

std::vector<nn::Param *> conv_params(Predictor & model)
{
  std::vector<nn::Param *> out;
  for (auto & c : model.conv) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

}  // namespace

std::vector<double> pretrain_patch_encoder(Predictor & model, std::span<const WindowInput> inputs,
                                           const PretrainConfig & cfg)
{
  if (!model.config().use_map) {
    throw ValidationError("patch pretraining needs a model with use_map enabled");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0) || cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ValidationError("invalid pretraining settings");
  }
  const int plane = model.config().patch.size * model.config().patch.size;
  Rng init = make_stream(cfg.seed, Stream::kInit, 2);
  nn::Linear recon("recon", kMapEmbedDim, plane);
  recon.init(init);

  std::vector<nn::Param *> params = conv_params(model);
  params.push_back(&recon.weight);
  params.push_back(&recon.bias);
  std::vector<nn::Matrix> velocity;
  for (const auto * p : params) {
    velocity.push_back(nn::Matrix::Zero(p->value.rows(), p->value.cols()));
  }

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<WindowInput> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(inputs[order[i]]);
      }
      const auto b_count = static_cast<Eigen::Index>(batch.size());
      const std::vector<nn::Matrix> noise(batch.size(), nn::Matrix::Zero(model.config().noise_dim, 1));
      const ForwardTrace tr = model.forward(batch, noise);

      nn::Matrix target(plane, b_count);
      for (Eigen::Index b = 0; b < b_count; ++b) {
        target.col(b) = batch[static_cast<std::size_t>(b)].patch;
      }
      const nn::Matrix logits = recon.forward(tr.map_features);
      const nn::Matrix y = (1.0 + (-logits.array()).exp()).inverse().matrix();
      const nn::Matrix diff = y - target;
      total += diff.squaredNorm() / plane;

      for (auto * p : params) {
        p->grad.setZero();
      }
      // Per-patch summed squared error, averaged over the batch.
      const nn::Matrix dlogits =
        (2.0 / static_cast<double>(b_count)) * (diff.array() * y.array() * (1.0 - y.array())).matrix();
      const nn::Matrix dfeatures = recon.backward(tr.map_features, dlogits);
      model.backward_patch_encoder(tr, dfeatures);
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] + params[i]->grad;
        params[i]->value -= cfg.lr * velocity[i];
      }
    }
    history.push_back(inputs.empty() ? 0.0 : total / static_cast<double>(inputs.size()));
  }
  for (auto * p : params) {
    p->grad.setZero();
  }
  return history;
}

nlohmann::json patch_encoder_to_json(const Predictor & model)
{
  std::vector<const nn::Param *> params;
  for (const auto & c : model.conv) {
    params.push_back(&c.weight);
    params.push_back(&c.bias);
  }
  return {{"format", kEncoderFormat}, {"patch_size", model.config().patch.size}, {"params", params_to_json(params)}};
}

void load_patch_encoder(Predictor & model, const nlohmann::json & j)
{
  if (j.value("format", std::string{}) != kEncoderFormat) {
    throw FormatError("not a patch encoder file");
  }
  if (!model.config().use_map) {
    throw ValidationError("cannot load a patch encoder into a model without map input");
  }
  if (j.at("patch_size").get<int>() != model.config().patch.size) {
    throw ShapeError("patch encoder was trained for a different patch size");
  }
  params_from_json(j.at("params"), conv_params(model));
}

}  // namespace ecam
