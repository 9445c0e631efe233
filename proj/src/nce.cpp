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

#include "ecam/nce.hpp"

#include <cmath>

#include "ecam/errors.hpp"

namespace ecam
{

namespace
{

constexpr double kNormFloor = 1e-12;

// Column-wise L2 normalisation and its vector-Jacobian product.
nn::Matrix normalize_columns(const nn::Matrix & x, Eigen::VectorXd & norms)
{
  norms = x.colwise().norm().transpose().cwiseMax(kNormFloor);
  nn::Matrix y = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    y.col(j) /= norms(j);
  }
  return y;
}

nn::Matrix normalize_columns_backward(const nn::Matrix & y, const Eigen::VectorXd & norms, const nn::Matrix & dy)
{
  nn::Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index j = 0; j < dy.cols(); ++j) {
    dx.col(j) = (dy.col(j) - y.col(j) * y.col(j).dot(dy.col(j))) / norms(j);
  }
  return dx;
}

}  // namespace

nlohmann::json NceConfig::to_json() const
{
  return {{"tau", tau}, {"embed_dim", embed_dim}, {"key_hidden", key_hidden},
          {"normalize_embeddings", normalize_embeddings}};
}

NceConfig NceConfig::from_json(const nlohmann::json & j)
{
  NceConfig c;
  c.tau = j.value("tau", c.tau);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.key_hidden = j.value("key_hidden", c.key_hidden);
  c.normalize_embeddings = j.value("normalize_embeddings", c.normalize_embeddings);
  if (!(c.tau > 0.0) || c.embed_dim < 1 || c.key_hidden < 1) {
    throw ValidationError("invalid contrastive configuration");
  }
  return c;
}

QueryEncoder::QueryEncoder(int hidden, int embed_dim) : proj("query", hidden, embed_dim) {}

nn::Vector QueryEncoder::encode(const nn::Vector & h) const
{
  if (h.size() != proj.in_dim()) {
    throw ShapeError("query encoder expects " + std::to_string(proj.in_dim()) + " inputs, got " +
                     std::to_string(h.size()));
  }
  return proj.forward(h).col(0);
}

KeyEncoder::KeyEncoder(int hidden, int embed_dim) : layer1("key1", 2, hidden), layer2("key2", hidden, embed_dim) {}

nn::Vector KeyEncoder::encode(const Vec2 & p) const
{
  nn::Matrix pre;
  nn::Matrix act;
  return forward(nn::Matrix(p), pre, act).col(0);
}

nn::Matrix KeyEncoder::forward(const nn::Matrix & points, nn::Matrix & pre, nn::Matrix & act) const
{
  pre = layer1.forward(points);
  act = nn::elu_forward(pre);
  return layer2.forward(act);
}

void KeyEncoder::backward(const nn::Matrix & points, const nn::Matrix & pre, const nn::Matrix & act,
                          const nn::Matrix & dkeys)
{
  const nn::Matrix dact = layer2.backward(act, dkeys);
  layer1.backward(points, nn::elu_backward(pre, dact));
}

nn::Vector encode_query(const QueryEncoder & enc, const nn::Vector & h)
{
  return enc.encode(h);
}

nn::Vector encode_key(const KeyEncoder & enc, const Vec2 & p)
{
  return enc.encode(p);
}

NceLoss mapnce_loss(const ContrastiveBatch & batch)
{
  if (!(batch.temperature > 0.0)) {
    throw ValidationError("temperature must be positive");
  }
  if (batch.keys.cols() < 1) {
    throw ValidationError("contrastive batch needs at least one key");
  }
  if (batch.keys.rows() != batch.query.size()) {
    throw ShapeError("query and key dimensions differ");
  }
  if (!batch.query.allFinite() || !batch.keys.allFinite()) {
    throw NumericError("non-finite query or key");
  }
  const Eigen::VectorXd logits = (batch.keys.transpose() * batch.query) / batch.temperature;
  const double max_logit = logits.maxCoeff();
  const Eigen::ArrayXd shifted = (logits.array() - max_logit).exp();
  const double sum = shifted.sum();
  NceLoss out;
  out.loss = max_logit + std::log(sum) - logits(0);
  // Rounding can push the exact-zero case slightly negative.
  out.loss = std::max(out.loss, 0.0);
  Eigen::VectorXd dlogits = shifted.matrix() / sum;
  dlogits(0) -= 1.0;
  out.dquery = batch.keys * dlogits / batch.temperature;
  out.dkeys = batch.query * dlogits.transpose() / batch.temperature;
  if (!std::isfinite(out.loss) || !out.dquery.allFinite()) {
    throw NumericError("non-finite contrastive loss");
  }
  return out;
}

MapNceHead::MapNceHead(int hidden, const NceConfig & cfg, std::uint64_t seed)
: query(hidden, cfg.embed_dim), key(cfg.key_hidden, cfg.embed_dim), cfg_(cfg)
{
  Rng rng = make_stream(seed, Stream::kInit, 1);
  query.proj.init(rng);
  key.layer1.init(rng);
  key.layer2.init(rng);
}

void MapNceHead::visit(const nn::ParamVisitor & f)
{
  query.proj.visit(f);
  key.layer1.visit(f);
  key.layer2.visit(f);
}

void MapNceHead::visit(const nn::ConstParamVisitor & f) const
{
  query.proj.visit(f);
  key.layer1.visit(f);
  key.layer2.visit(f);
}

MapNceHead::Result MapNceHead::loss(const nn::Matrix & h, std::span<const SampleSet> samples,
                                    std::span<const CanonicalFrame> frames, double weight, bool accumulate_grads)
{
  const Eigen::Index b_count = h.cols();
  if (static_cast<Eigen::Index>(samples.size()) != b_count || static_cast<Eigen::Index>(frames.size()) != b_count) {
    throw ShapeError("MapNCE: one sample set and frame per pedestrian required");
  }
  Result res;
  res.dh = nn::Matrix::Zero(h.rows(), b_count);
  res.per_pedestrian.assign(static_cast<std::size_t>(b_count), 0.0);
  for (const auto & s : samples) {
    res.active += (!s.skip && !s.negatives.empty()) ? 1 : 0;
  }
  if (res.active == 0) {
    return res;
  }
  const double scale = weight / res.active;

  const nn::Matrix q_raw = query.proj.forward(h);
  Eigen::VectorXd q_norms;
  const nn::Matrix q = cfg_.normalize_embeddings ? normalize_columns(q_raw, q_norms) : q_raw;
  nn::Matrix dq = nn::Matrix::Zero(q.rows(), b_count);

  for (Eigen::Index b = 0; b < b_count; ++b) {
    const SampleSet & s = samples[static_cast<std::size_t>(b)];
    if (s.skip || s.negatives.empty()) {
      continue;
    }
    const auto & frame = frames[static_cast<std::size_t>(b)];
    const Eigen::Index n_pos = static_cast<Eigen::Index>(s.positives.size());
    const Eigen::Index n_neg = static_cast<Eigen::Index>(s.negatives.size());
    nn::Matrix points(2, n_pos + n_neg);
    for (Eigen::Index i = 0; i < n_pos; ++i) {
      points.col(i) = frame.to_local(s.positives[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < n_neg; ++i) {
      points.col(n_pos + i) = frame.to_local(s.negatives[static_cast<std::size_t>(i)]);
    }
    nn::Matrix pre;
    nn::Matrix act;
    const nn::Matrix keys_raw = key.forward(points, pre, act);
    Eigen::VectorXd k_norms;
    const nn::Matrix keys = cfg_.normalize_embeddings ? normalize_columns(keys_raw, k_norms) : keys_raw;

    nn::Matrix dkeys = nn::Matrix::Zero(keys.rows(), keys.cols());
    ContrastiveBatch batch;
    batch.query = q.col(b);
    batch.temperature = cfg_.tau;
    batch.keys.resize(keys.rows(), 1 + n_neg);
    batch.keys.rightCols(n_neg) = keys.rightCols(n_neg);
    double loss_b = 0.0;
    for (Eigen::Index i = 0; i < n_pos; ++i) {
      batch.keys.col(0) = keys.col(i);
      const NceLoss r = mapnce_loss(batch);
      loss_b += r.loss / static_cast<double>(n_pos);
      dq.col(b) += r.dquery / static_cast<double>(n_pos);
      dkeys.col(i) += r.dkeys.col(0) / static_cast<double>(n_pos);
      dkeys.rightCols(n_neg) += r.dkeys.rightCols(n_neg) / static_cast<double>(n_pos);
    }
    res.per_pedestrian[static_cast<std::size_t>(b)] = loss_b;
    res.loss += loss_b / res.active;

    if (accumulate_grads) {
      dkeys *= scale;
      const nn::Matrix dkeys_raw = cfg_.normalize_embeddings ? normalize_columns_backward(keys, k_norms, dkeys) : dkeys;
      key.backward(points, pre, act, dkeys_raw);
    }
  }

  dq *= scale;
  const nn::Matrix dq_raw = cfg_.normalize_embeddings ? normalize_columns_backward(q, q_norms, dq) : dq;
  if (accumulate_grads) {
    query.proj.weight.grad.noalias() += dq_raw * h.transpose();
    query.proj.bias.grad.col(0) += dq_raw.rowwise().sum();
  }
  res.dh = query.proj.weight.value.transpose() * dq_raw;
  return res;
}

}  // namespace ecam
