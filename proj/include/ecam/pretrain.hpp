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

#ifndef ECAM__PRETRAIN_HPP_
#define ECAM__PRETRAIN_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/model.hpp"

namespace ecam
{

struct PretrainConfig
{
  int epochs{5};
  int batch_size{64};
  double lr{0.005};
  double momentum{0.9};
  std::uint64_t seed{0};
};

/// Trains the conv stack of `model` as the encoder of a patch autoencoder
/// (linear + sigmoid decoder, pixel MSE). Returns the mean loss per epoch.
std::vector<double> pretrain_patch_encoder(Predictor & model, std::span<const WindowInput> inputs,
                                           const PretrainConfig & cfg);

nlohmann::json patch_encoder_to_json(const Predictor & model);
void load_patch_encoder(Predictor & model, const nlohmann::json & j);

}  // namespace ecam

#endif  // ECAM__PRETRAIN_HPP_
