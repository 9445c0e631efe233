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

#include "ecam/model.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "ecam/errors.hpp"

namespace ecam
{

namespace
{

constexpr std::array<int, 5> kConvChannels{1, 4, 8, 8, 16};
constexpr double kStationaryEps = 1e-12;

int conv_output_size(int patch_size)
{
  int s = patch_size;
  for (std::size_t i = 0; i < 4; ++i) {
    s = nn::Conv2d::output_size(s);
  }
  return s;
}

}  // namespace

CanonicalFrame CanonicalFrame::from_past(std::span<const Vec2> past)
{
  CanonicalFrame f;
  if (past.empty()) {
    return f;
  }
  f.origin = past.back();
  for (std::size_t i = past.size() - 1; i > 0; --i) {
    const Vec2 d = past[i] - past[i - 1];
    if (d.norm() > kStationaryEps) {
      f.heading = std::atan2(d.y(), d.x());
      break;
    }
  }
  const double c = std::cos(f.heading);
  const double s = std::sin(f.heading);
  f.rotation << c, -s, s, c;
  return f;
}

nlohmann::json ModelConfig::to_json() const
{
  return {{"obs_len", obs_len},
          {"pred_len", pred_len},
          {"hidden", hidden},
          {"history_hidden", history_hidden},
          {"decoder_hidden", decoder_hidden},
          {"noise_dim", noise_dim},
          {"use_map", use_map},
          {"patch_size", patch.size},
          {"patch_cell_size", patch.cell_size},
          {"patch_forward_offset", patch.forward_offset}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json & j)
{
  ModelConfig c;
  c.obs_len = j.value("obs_len", c.obs_len);
  c.pred_len = j.value("pred_len", c.pred_len);
  c.hidden = j.value("hidden", c.hidden);
  c.history_hidden = j.value("history_hidden", c.history_hidden);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.noise_dim = j.value("noise_dim", c.noise_dim);
  c.use_map = j.value("use_map", c.use_map);
  c.patch.size = j.value("patch_size", c.patch.size);
  c.patch.cell_size = j.value("patch_cell_size", c.patch.cell_size);
  c.patch.forward_offset = j.value("patch_forward_offset", c.patch.forward_offset);
  return c;
}

WindowInput prepare_input(const TrajectoryWindow & window, const OccupancyMap * map, const ModelConfig & cfg)
{
  if (static_cast<int>(window.past.size()) != cfg.obs_len) {
    throw ShapeError("window past length " + std::to_string(window.past.size()) +
                     " != obs_len " + std::to_string(cfg.obs_len));
  }
  for (const auto & p : window.past) {
    if (!p.allFinite()) {
      throw ValidationError("non-finite coordinate in observed trajectory");
    }
  }
  WindowInput in;
  in.frame = CanonicalFrame::from_past(window.past);
  in.history.resize(2 * (cfg.obs_len - 1));
  for (int t = 1; t < cfg.obs_len; ++t) {
    const Vec2 d = in.frame.rotation.transpose() * (window.past[t] - window.past[t - 1]);
    in.history.segment<2>(2 * (t - 1)) = d;
  }
  if (cfg.use_map) {
    if (map == nullptr) {
      throw ValidationError("model uses the map but no map was supplied");
    }
    const MapPatch patch = extract_patch(*map, in.frame.origin, in.frame.heading, cfg.patch);
    in.patch.resize(static_cast<Eigen::Index>(patch.grid.size()));
    for (std::size_t i = 0; i < patch.grid.size(); ++i) {
      in.patch(static_cast<Eigen::Index>(i)) = patch.grid[i] == 0 ? 1.0 : 0.0;
    }
  }
  return in;
}

Predictor::Predictor(const ModelConfig & cfg, std::uint64_t seed)
: history1("history1", 2 * (cfg.obs_len - 1), cfg.history_hidden),
  history2("history2", cfg.history_hidden, cfg.hidden),
  decoder1("decoder1", cfg.hidden + cfg.noise_dim, cfg.decoder_hidden),
  decoder2("decoder2", cfg.decoder_hidden, 2 * cfg.pred_len),
  cfg_(cfg)
{
  if (cfg.obs_len < 2 || cfg.pred_len < 1 || cfg.hidden < 1 || cfg.noise_dim < 0) {
    throw ValidationError("invalid model dimensions");
  }
  Rng rng = make_stream(seed, Stream::kInit);
  history1.init(rng);
  history2.init(rng);
  if (cfg.use_map) {
    for (std::size_t i = 0; i < conv.size(); ++i) {
      conv[i] = nn::Conv2d("conv" + std::to_string(i + 1), kConvChannels[i], kConvChannels[i + 1]);
      conv[i].init(rng);
    }
    const int s = conv_output_size(cfg.patch.size);
    map_proj = nn::Linear("map_proj", kConvChannels.back() * s * s, cfg.hidden);
    map_proj.init(rng);
  }
  decoder1.init(rng);
  decoder2.init(rng);
}

void Predictor::visit(const nn::ParamVisitor & f)
{
  history1.visit(f);
  history2.visit(f);
  if (cfg_.use_map) {
    for (auto & c : conv) {
      c.visit(f);
    }
    map_proj.visit(f);
  }
  decoder1.visit(f);
  decoder2.visit(f);
}

void Predictor::visit(const nn::ConstParamVisitor & f) const
{
  history1.visit(f);
  history2.visit(f);
  if (cfg_.use_map) {
    for (const auto & c : conv) {
      c.visit(f);
    }
    map_proj.visit(f);
  }
  decoder1.visit(f);
  decoder2.visit(f);
}

void Predictor::zero_grad()
{
  visit([](nn::Param & p) { p.grad.setZero(); });
}

nn::Matrix draw_noise(int noise_dim, int k, Rng & rng)
{
  nn::Matrix z(noise_dim, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < noise_dim; ++i) {
      z(i, j) = rng.normal();
    }
  }
  return z;
}

ForwardTrace Predictor::forward(std::span<const WindowInput> inputs, std::span<const nn::Matrix> noise) const
{
  if (inputs.size() != noise.size()) {
    throw ShapeError("one noise block per window required");
  }
  ForwardTrace tr;
  tr.batch = static_cast<int>(inputs.size());
  tr.k = inputs.empty() ? 0 : static_cast<int>(noise[0].cols());
  const int b_count = tr.batch;
  const int k = tr.k;
  const int hist_dim = 2 * (cfg_.obs_len - 1);

  tr.history_in.resize(hist_dim, b_count);
  tr.frames.reserve(inputs.size());
  for (int b = 0; b < b_count; ++b) {
    if (inputs[b].history.size() != hist_dim) {
      throw ShapeError("history input has wrong dimension");
    }
    tr.history_in.col(b) = inputs[b].history;
    tr.frames.push_back(inputs[b].frame);
  }
  tr.history_act = nn::tanh_forward(history1.forward(tr.history_in));
  tr.h_history = history2.forward(tr.history_act);

  if (cfg_.use_map) {
    const int s0 = cfg_.patch.size;
    const Eigen::Index plane = static_cast<Eigen::Index>(s0) * s0;
    nn::Matrix x(1, b_count * plane);
    for (int b = 0; b < b_count; ++b) {
      if (inputs[b].patch.size() != plane) {
        throw ShapeError("patch input has wrong dimension");
      }
      x.block(0, b * plane, 1, plane) = inputs[b].patch.transpose();
    }
    int s = s0;
    for (std::size_t i = 0; i < conv.size(); ++i) {
      tr.conv_pre[i] = conv[i].forward(x, b_count, s, tr.conv_cols[i]);
      x = nn::elu_forward(tr.conv_pre[i]);
      s = nn::Conv2d::output_size(s);
    }
    const Eigen::Index out_plane = static_cast<Eigen::Index>(s) * s;
    const Eigen::Index channels = x.rows();
    tr.map_features.resize(channels * out_plane, b_count);
    for (int b = 0; b < b_count; ++b) {
      for (Eigen::Index c = 0; c < channels; ++c) {
        tr.map_features.block(c * out_plane, b, out_plane, 1) =
          x.block(c, b * out_plane, 1, out_plane).transpose();
      }
    }
    tr.map_embedding = map_proj.forward(tr.map_features);
    tr.h = tr.h_history + tr.map_embedding;
  } else {
    tr.h = tr.h_history;
  }

  const int h_dim = cfg_.hidden;
  tr.decoder_in.resize(h_dim + cfg_.noise_dim, static_cast<Eigen::Index>(b_count) * k);
  for (int b = 0; b < b_count; ++b) {
    if (noise[b].rows() != cfg_.noise_dim || noise[b].cols() != k) {
      throw ShapeError("noise block has wrong shape");
    }
    for (int j = 0; j < k; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * k + j;
      tr.decoder_in.block(0, col, h_dim, 1) = tr.h.col(b);
      tr.decoder_in.block(h_dim, col, cfg_.noise_dim, 1) = noise[b].col(j);
    }
  }
  tr.decoder_act = nn::tanh_forward(decoder1.forward(tr.decoder_in));
  tr.offsets = decoder2.forward(tr.decoder_act);

  const int t_pred = cfg_.pred_len;
  tr.predictions.samples.assign(b_count, std::vector<Trajectory>(k, Trajectory(t_pred)));
  for (int b = 0; b < b_count; ++b) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * k + j;
      Vec2 local = Vec2::Zero();
      for (int t = 0; t < t_pred; ++t) {
        local += tr.offsets.block<2, 1>(2 * t, col);
        tr.predictions.samples[b][j][t] = tr.frames[b].to_world(local);
      }
    }
  }
  return tr;
}

void Predictor::backward(const ForwardTrace & tr, const PredictionSet & dpred, const nn::Matrix & dh_extra)
{
  const int b_count = tr.batch;
  const int k = tr.k;
  const int t_pred = cfg_.pred_len;
  const int h_dim = cfg_.hidden;

  // World-space position gradients -> canonical per-step displacement gradients
  // (reverse cumulative sum of the rotated gradients).
  nn::Matrix doffsets = nn::Matrix::Zero(2 * t_pred, static_cast<Eigen::Index>(b_count) * k);
  for (int b = 0; b < b_count; ++b) {
    const Eigen::Matrix2d rt = tr.frames[b].rotation.transpose();
    for (int j = 0; j < k; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * k + j;
      Vec2 acc = Vec2::Zero();
      for (int t = t_pred - 1; t >= 0; --t) {
        acc += rt * dpred.samples[b][j][t];
        doffsets.block<2, 1>(2 * t, col) = acc;
      }
    }
  }
  const nn::Matrix ddec_act = decoder2.backward(tr.decoder_act, doffsets);
  const nn::Matrix ddec_pre = nn::tanh_backward(tr.decoder_act, ddec_act);
  const nn::Matrix ddec_in = decoder1.backward(tr.decoder_in, ddec_pre);

  nn::Matrix dh = dh_extra.size() > 0 ? dh_extra : nn::Matrix::Zero(h_dim, b_count);
  for (int b = 0; b < b_count; ++b) {
    for (int j = 0; j < k; ++j) {
      dh.col(b) += ddec_in.block(0, static_cast<Eigen::Index>(b) * k + j, h_dim, 1);
    }
  }

  const nn::Matrix dhist_act = history2.backward(tr.history_act, dh);
  history1.backward(tr.history_in, nn::tanh_backward(tr.history_act, dhist_act));

  if (cfg_.use_map) {
    const nn::Matrix dfeatures = map_proj.backward(tr.map_features, dh);
    backward_patch_encoder(tr, dfeatures);
  }
}

void Predictor::backward_patch_encoder(const ForwardTrace & tr, const nn::Matrix & dfeatures)
{
  const int b_count = tr.batch;
  int sizes[5];
  sizes[0] = cfg_.patch.size;
  for (int i = 0; i < 4; ++i) {
    sizes[i + 1] = nn::Conv2d::output_size(sizes[i]);
  }
  const Eigen::Index out_plane = static_cast<Eigen::Index>(sizes[4]) * sizes[4];
  const Eigen::Index channels = conv.back().out_channels;
  nn::Matrix dx(channels, b_count * out_plane);
  for (int b = 0; b < b_count; ++b) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      dx.block(c, b * out_plane, 1, out_plane) = dfeatures.block(c * out_plane, b, out_plane, 1).transpose();
    }
  }
  for (int i = 3; i >= 0; --i) {
    const nn::Matrix dpre = nn::elu_backward(tr.conv_pre[i], dx);
    if (i == 0) {
      // No gradient needed w.r.t. the binary patch itself.
      conv[0].weight.grad.noalias() += dpre * tr.conv_cols[0].transpose();
      conv[0].bias.grad.col(0) += dpre.rowwise().sum();
    } else {
      dx = conv[i].backward(tr.conv_cols[i], dpre, b_count, sizes[i]);
    }
  }
}

nn::Vector Predictor::encode_history(const WindowInput & input) const
{
  nn::Matrix x = input.history;
  return history2.forward(nn::tanh_forward(history1.forward(x))).col(0);
}

nn::Vector Predictor::encode_map(const WindowInput & input) const
{
  if (!cfg_.use_map) {
    return nn::Vector::Zero(cfg_.hidden);
  }
  const nn::Matrix noise = nn::Matrix::Zero(cfg_.noise_dim, 1);
  const ForwardTrace tr = forward(std::span<const WindowInput>(&input, 1), std::span<const nn::Matrix>(&noise, 1));
  return tr.map_embedding.col(0);
}

nn::Vector Predictor::fuse(const nn::Vector & h_history, const nn::Vector & map_embedding) const
{
  if (h_history.size() != map_embedding.size()) {
    throw ShapeError("fuse: dimension mismatch");
  }
  return h_history + map_embedding;
}

std::vector<Trajectory> Predictor::decode_samples(const nn::Vector & h, const nn::Matrix & noise,
                                                  const CanonicalFrame & frame) const
{
  if (h.size() != cfg_.hidden || noise.rows() != cfg_.noise_dim) {
    throw ShapeError("decode_samples: dimension mismatch");
  }
  const Eigen::Index k = noise.cols();
  nn::Matrix in(cfg_.hidden + cfg_.noise_dim, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    in.block(0, j, cfg_.hidden, 1) = h;
    in.block(cfg_.hidden, j, cfg_.noise_dim, 1) = noise.col(j);
  }
  const nn::Matrix out = decoder2.forward(nn::tanh_forward(decoder1.forward(in)));
  std::vector<Trajectory> samples(static_cast<std::size_t>(k), Trajectory(cfg_.pred_len));
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec2 local = Vec2::Zero();
    for (int t = 0; t < cfg_.pred_len; ++t) {
      local += out.block<2, 1>(2 * t, j);
      samples[static_cast<std::size_t>(j)][t] = frame.to_world(local);
    }
  }
  return samples;
}

std::vector<Trajectory> Predictor::decode_samples(const nn::Vector & h, int k, Rng & rng,
                                                  const CanonicalFrame & frame) const
{
  if (k < 1) {
    throw ValidationError("decode_samples: K must be >= 1");
  }
  return decode_samples(h, draw_noise(cfg_.noise_dim, k, rng), frame);
}

std::vector<Trajectory> Predictor::predict(const WindowInput & input, int k, Rng & rng) const
{
  const nn::Matrix noise = draw_noise(cfg_.noise_dim, k, rng);
  ForwardTrace tr = forward(std::span<const WindowInput>(&input, 1), std::span<const nn::Matrix>(&noise, 1));
  return std::move(tr.predictions.samples[0]);
}

nlohmann::json params_to_json(const std::vector<const nn::Param *> & params)
{
  nlohmann::json out = nlohmann::json::object();
  for (const auto * p : params) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    out[p->name] = {{"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", std::move(data)}};
  }
  return out;
}

void params_from_json(const nlohmann::json & j, const std::vector<nn::Param *> & params)
{
  for (auto * p : params) {
    if (!j.contains(p->name)) {
      throw FormatError("checkpoint is missing parameter " + p->name);
    }
    const auto & e = j.at(p->name);
    if (e.at("rows").get<Eigen::Index>() != p->value.rows() || e.at("cols").get<Eigen::Index>() != p->value.cols()) {
      throw ShapeError("checkpoint parameter " + p->name + " has wrong shape");
    }
    const auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p->value.size()) {
      throw ShapeError("checkpoint parameter " + p->name + " has wrong size");
    }
    std::copy(data.begin(), data.end(), p->value.data());
  }
}

nlohmann::json predictor_to_json(const Predictor & model)
{
  std::vector<const nn::Param *> params;
  model.visit([&](const nn::Param & p) { params.push_back(&p); });
  return {{"config", model.config().to_json()}, {"params", params_to_json(params)}};
}

Predictor predictor_from_json(const nlohmann::json & j)
{
  Predictor model(ModelConfig::from_json(j.at("config")), 0);
  std::vector<nn::Param *> params;
  model.visit([&](nn::Param & p) { params.push_back(&p); });
  params_from_json(j.at("params"), params);
  return model;
}

Predictor load_predictor(const std::filesystem::path & checkpoint)
{
  std::ifstream in(checkpoint);
  if (!in) {
    throw FormatError("cannot open checkpoint " + checkpoint.string());
  }
  nlohmann::json j;
  try {
    in >> j;
    return predictor_from_json(j.at("predictor"));
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(checkpoint.string() + ": " + e.what());
  }
}

}  // namespace ecam
