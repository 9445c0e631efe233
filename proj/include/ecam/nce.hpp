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

#ifndef ECAM__NCE_HPP_
#define ECAM__NCE_HPP_

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecam/model.hpp"
#include "ecam/nn.hpp"
#include "ecam/rng.hpp"
#include "ecam/sampling.hpp"

namespace ecam
{

struct NceConfig
{
  double tau{0.5};
  int embed_dim{16};
  int key_hidden{32};
  bool normalize_embeddings{false};

  nlohmann::json to_json() const;
  static NceConfig from_json(const nlohmann::json & j);
};

/// Linear projection head from the model's hidden representation to the
/// contrastive embedding space.
struct QueryEncoder
{
  nn::Linear proj;

  QueryEncoder() = default;
  QueryEncoder(int hidden, int embed_dim);

  nn::Vector encode(const nn::Vector & h) const;
};

/// Two-layer MLP (2 -> hidden -> E, ELU between) over sample positions.
struct KeyEncoder
{
  nn::Linear layer1;
  nn::Linear layer2;

  KeyEncoder() = default;
  KeyEncoder(int hidden, int embed_dim);

  nn::Vector encode(const Vec2 & p) const;
  // points: 2 x M -> E x M; pre holds the hidden pre-activation for backward.
  nn::Matrix forward(const nn::Matrix & points, nn::Matrix & pre, nn::Matrix & act) const;
  void backward(const nn::Matrix & points, const nn::Matrix & pre, const nn::Matrix & act,
                const nn::Matrix & dkeys);
};

nn::Vector encode_query(const QueryEncoder & enc, const nn::Vector & h);
nn::Vector encode_key(const KeyEncoder & enc, const Vec2 & p);

struct ContrastiveBatch
{
  nn::Vector query;
  nn::Matrix keys;  // E x (1 + J); column 0 is the positive key
  double temperature{0.5};
};

struct NceLoss
{
  double loss{0.0};
  nn::Vector dquery;
  nn::Matrix dkeys;
};

/// -log softmax of the positive logit among q.k_j / tau, with a max-shifted
/// log-sum-exp, and its gradients w.r.t. the query and every key.
NceLoss mapnce_loss(const ContrastiveBatch & batch);

/// Query/key encoders plus the scene-level loss over a batch of pedestrians.
///
/// Sample points are expressed in each pedestrian's canonical frame before
/// key encoding, matching the frame the hidden representation lives in.
class MapNceHead
{
public:
  MapNceHead() = default;
  MapNceHead(int hidden, const NceConfig & cfg, std::uint64_t seed);

  const NceConfig & config() const { return cfg_; }

  struct Result
  {
    double loss{0.0};       // mean over non-skipped pedestrians
    int active{0};          // pedestrians contributing
    nn::Matrix dh;          // d(loss)/d(h), H x B
    std::vector<double> per_pedestrian;
  };

  /// h: H x B. Accumulates encoder gradients scaled by `weight` and returns
  /// dh already multiplied by `weight`.
  Result loss(const nn::Matrix & h, std::span<const SampleSet> samples, std::span<const CanonicalFrame> frames,
              double weight, bool accumulate_grads);

  void visit(const nn::ParamVisitor & f);
  void visit(const nn::ConstParamVisitor & f) const;

  QueryEncoder query;
  KeyEncoder key;

private:
  NceConfig cfg_;
};

}  // namespace ecam

#endif  // ECAM__NCE_HPP_
