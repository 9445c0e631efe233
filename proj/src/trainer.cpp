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

#include "ecam/trainer.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace ecam
{

namespace
{

constexpr const char * kCheckpointFormat = "ecam-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr std::uint64_t kSampleSetTag = 0x5A3D;
constexpr std::size_t kEvalBatch = 128;

const std::set<std::string> & known_config_keys()
{
  static const std::set<std::string> keys{
    "obs_len", "pred_len", "hidden", "history_hidden", "decoder_hidden", "noise_dim", "use_map",
    "patch_size", "patch_cell_size", "patch_forward_offset",
    "z_seeds", "rho_m", "c_eps_m", "seed_radius_m", "positive_t_mode",
    "tau", "embed_dim", "key_hidden", "normalize_embeddings",
    "ablation", "use_env_col_loss", "use_map_nce",
    "lambda_env", "lambda_nce", "collision_segment_check", "k_samples",
    "lr", "momentum", "grad_clip", "batch_size", "epochs", "window_stride", "seed"};
  return keys;
}

nlohmann::json window_to_json(const TrajectoryWindow & w)
{
  nlohmann::json past = nlohmann::json::array();
  nlohmann::json future = nlohmann::json::array();
  for (const auto & p : w.past) {
    past.push_back({p.x(), p.y()});
  }
  for (const auto & p : w.future) {
    future.push_back({p.x(), p.y()});
  }
  return {{"scene", w.scene_label}, {"ped_id", w.ped_id}, {"start_frame", w.start_frame},
          {"past", past}, {"future", future}};
}

void add_scaled(PredictionSet & acc, const PredictionSet & g, double w)
{
  for (std::size_t i = 0; i < acc.samples.size(); ++i) {
    for (std::size_t k = 0; k < acc.samples[i].size(); ++k) {
      for (std::size_t t = 0; t < acc.samples[i][k].size(); ++t) {
        acc.samples[i][k][t] += w * g.samples[i][k][t];
      }
    }
  }
}

}  // namespace

AblationFlags ablation_flags(Ablation a)
{
  switch (a) {
    case Ablation::kBaseline:
      return {false, false, false};
    case Ablation::kMap:
      return {true, false, false};
    case Ablation::kEnvColLoss:
      return {true, true, false};
    case Ablation::kMapNce:
      return {true, false, true};
    case Ablation::kEcam:
      return {true, true, true};
  }
  return {};
}

Ablation parse_ablation(const std::string & name)
{
  if (name == "baseline") {
    return Ablation::kBaseline;
  }
  if (name == "map") {
    return Ablation::kMap;
  }
  if (name == "envcol" || name == "env_col_loss") {
    return Ablation::kEnvColLoss;
  }
  if (name == "mapnce" || name == "map_nce") {
    return Ablation::kMapNce;
  }
  if (name == "ecam") {
    return Ablation::kEcam;
  }
  throw ValidationError("unknown ablation '" + name + "' (baseline|map|envcol|mapnce|ecam)");
}

std::string ablation_name(Ablation a)
{
  switch (a) {
    case Ablation::kBaseline:
      return "baseline";
    case Ablation::kMap:
      return "map";
    case Ablation::kEnvColLoss:
      return "envcol";
    case Ablation::kMapNce:
      return "mapnce";
    case Ablation::kEcam:
      return "ecam";
  }
  return "?";
}

const std::vector<Ablation> & all_ablations()
{
  static const std::vector<Ablation> all{Ablation::kBaseline, Ablation::kMap, Ablation::kEnvColLoss,
                                         Ablation::kMapNce, Ablation::kEcam};
  return all;
}

nlohmann::json TrainConfig::to_json() const
{
  nlohmann::json j = model.to_json();
  j.update(sampling.to_json());
  j.update(nce.to_json());
  const auto flags = ablation_flags(ablation);
  j["ablation"] = ablation_name(ablation);
  j["use_map"] = flags.use_map;
  j["use_env_col_loss"] = flags.use_env_col_loss;
  j["use_map_nce"] = flags.use_map_nce;
  j["lambda_env"] = lambda_env;
  j["lambda_nce"] = lambda_nce;
  j["collision_segment_check"] = collision_segment_check;
  j["k_samples"] = k_samples;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["grad_clip"] = grad_clip;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["window_stride"] = window_stride;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json & j)
{
  if (!j.is_object()) {
    throw ValidationError("config must be a JSON object");
  }
  for (const auto & [key, _] : j.items()) {
    if (!known_config_keys().count(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.model = ModelConfig::from_json(j);
    c.sampling = SamplingConfig::from_json(j);
    c.nce = NceConfig::from_json(j);
    if (j.contains("ablation")) {
      c.ablation = parse_ablation(j.at("ablation").get<std::string>());
    } else if (j.contains("use_map") || j.contains("use_env_col_loss") || j.contains("use_map_nce")) {
      const AblationFlags f{j.value("use_map", true), j.value("use_env_col_loss", false),
                            j.value("use_map_nce", false)};
      bool found = false;
      for (const auto a : all_ablations()) {
        const auto g = ablation_flags(a);
        if (g.use_map == f.use_map && g.use_env_col_loss == f.use_env_col_loss && g.use_map_nce == f.use_map_nce) {
          c.ablation = a;
          found = true;
        }
      }
      if (!found) {
        throw ValidationError("ablation flags do not match any ablation row (contrastive and collision "
                              "losses require use_map)");
      }
    }
    c.lambda_env = j.value("lambda_env", c.lambda_env);
    c.lambda_nce = j.value("lambda_nce", c.lambda_nce);
    c.collision_segment_check = j.value("collision_segment_check", c.collision_segment_check);
    c.k_samples = j.value("k_samples", c.k_samples);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.window_stride = j.value("window_stride", c.window_stride);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  if (c.lambda_env < 0.0 || c.lambda_nce < 0.0) {
    throw ValidationError("loss weights must be non-negative");
  }
  if (c.k_samples < 1 || c.batch_size < 1 || c.epochs < 0 || !(c.lr > 0.0) || c.momentum < 0.0 ||
      c.momentum >= 1.0 || c.grad_clip < 0.0 || c.window_stride < 1)
  {
    throw ValidationError("invalid optimisation settings");
  }
  c.apply_ablation();
  return c;
}

void TrainConfig::apply_ablation()
{
  model.use_map = ablation_flags(ablation).use_map;
}

TrainingSet::TrainingSet(std::vector<Scene> scenes, const ModelConfig & cfg) : scenes_(std::move(scenes))
{
  contours_.reserve(scenes_.size());
  for (std::size_t s = 0; s < scenes_.size(); ++s) {
    contours_.push_back(extract_contours(scenes_[s].map));
    for (const auto & w : scenes_[s].windows) {
      if (static_cast<int>(w.future.size()) != cfg.pred_len) {
        throw ShapeError("window future length does not match pred_len");
      }
      items_.push_back(Item{s, w, prepare_input(w, &scenes_[s].map, cfg)});
    }
  }
}

Trainer::Trainer(const TrainConfig & cfg) : cfg_(cfg)
{
  cfg_.apply_ablation();
  model_ = Predictor(cfg_.model, cfg_.seed);
  head_ = MapNceHead(cfg_.model.hidden, cfg_.nce, cfg_.seed);
  visit([&](const nn::Param & p) { velocity_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols())); });
}

void Trainer::visit(const nn::ParamVisitor & f)
{
  model_.visit(f);
  if (cfg_.use_map_nce()) {
    head_.visit(f);
  }
}

void Trainer::visit(const nn::ConstParamVisitor & f) const
{
  model_.visit(f);
  if (cfg_.use_map_nce()) {
    head_.visit(f);
  }
}

ObjectiveResult Trainer::objective(const TrainingSet & data, std::span<const std::size_t> batch,
                                   std::uint64_t step_seed, bool compute_grads)
{
  const std::size_t b_count = batch.size();
  std::vector<WindowInput> inputs;
  std::vector<nn::Matrix> noise;
  std::vector<Trajectory> gt;
  std::vector<const OccupancyMap *> maps;
  inputs.reserve(b_count);
  noise.reserve(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    const auto & item = data.item(batch[b]);
    inputs.push_back(item.input);
    Rng rng = make_stream(step_seed, Stream::kDecoderNoise, b);
    noise.push_back(draw_noise(cfg_.model.noise_dim, cfg_.k_samples, rng));
    gt.push_back(item.window.future);
    maps.push_back(&data.scene(item.scene).map);
  }

  const auto diverged = [&](const std::string & what, const LossBreakdown * breakdown) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto i : batch) {
      windows.push_back(window_to_json(data.item(i).window));
    }
    nlohmann::json diag{{"reason", what}, {"step", step_}, {"epoch", epoch_}, {"step_seed", step_seed},
                        {"batch", windows}};
    if (breakdown) {
      diag["breakdown"] = breakdown->to_json();
    }
    throw DivergenceError(what + " at step " + std::to_string(step_), diag);
  };

  const ForwardTrace trace = model_.forward(inputs, noise);
  if (!trace.offsets.allFinite()) {
    diverged("non-finite predictions", nullptr);
  }

  ObjectiveResult res;
  auto variety = variety_loss(trace.predictions, gt);
  res.collisions = collision_mask(trace.predictions, maps, cfg_.collision_segment_check);
  std::size_t colliding = 0;
  std::size_t total = 0;
  for (const auto & row : res.collisions) {
    for (const auto c : row) {
      colliding += c;
      ++total;
    }
  }
  const double colliding_fraction = total ? static_cast<double>(colliding) / static_cast<double>(total) : 0.0;

  double env_value = 0.0;
  if (cfg_.use_env_col_loss()) {
    auto env = env_collision_loss(trace.predictions, gt, res.collisions);
    env_value = env.value;
    res.dpred_env = std::move(env.grad);
  }

  if (compute_grads) {
    model_.zero_grad();
    head_.visit([](nn::Param & p) { p.grad.setZero(); });
  }

  double nce_value = 0.0;
  nn::Matrix dh_extra;
  if (cfg_.use_map_nce()) {
    std::vector<SampleSet> samples;
    samples.reserve(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
      const auto & item = data.item(batch[b]);
      samples.push_back(build_sample_set(item.window, data.contours(item.scene), cfg_.sampling,
                                         derive_seed(step_seed, {kSampleSetTag, b})));
    }
    try {
      auto nce = head_.loss(trace.h, samples, trace.frames, cfg_.lambda_nce, compute_grads);
      nce_value = nce.loss;
      dh_extra = std::move(nce.dh);
    } catch (const NumericError & e) {
      diverged(e.what(), nullptr);
    }
  }

  res.breakdown = total_loss(variety.value, env_value, nce_value, cfg_.use_env_col_loss() ? cfg_.lambda_env : 0.0,
                             cfg_.use_map_nce() ? cfg_.lambda_nce : 0.0, colliding_fraction);
  if (!std::isfinite(res.breakdown.total)) {
    diverged("non-finite training loss", &res.breakdown);
  }

  res.variety_argmin = variety.argmin;
  res.dpred_variety = std::move(variety.grad);
  if (compute_grads) {
    PredictionSet dpred = res.dpred_variety;
    if (cfg_.use_env_col_loss()) {
      add_scaled(dpred, res.dpred_env, cfg_.lambda_env);
    }
    model_.backward(trace, dpred, dh_extra);
  }
  res.predictions = trace.predictions;
  return res;
}

void Trainer::sgd_update()
{
  double scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    visit([&](const nn::Param & p) { sq += p.grad.squaredNorm(); });
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      scale = cfg_.grad_clip / norm;
    }
  }
  std::size_t i = 0;
  visit([&](nn::Param & p) {
    auto & v = velocity_[i++];
    v = cfg_.momentum * v + scale * p.grad;
    p.value -= cfg_.lr * v;
  });
}

LossBreakdown Trainer::train_step(const TrainingSet & data, std::span<const std::size_t> batch,
                                  std::uint64_t step_seed)
{
  const ObjectiveResult r = objective(data, batch, step_seed, true);
  sgd_update();
  ++step_;
  return r.breakdown;
}

LossBreakdown Trainer::train_epoch(const TrainingSet & data)
{
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  Rng rng = make_stream(cfg_.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch_));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  LossBreakdown mean;
  std::size_t seen = 0;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0, idx = 0; start < order.size(); start += bs, ++idx) {
    const std::size_t end = std::min(order.size(), start + bs);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    const auto step_seed = derive_seed(cfg_.seed, {static_cast<std::uint64_t>(epoch_), idx});
    const LossBreakdown b = train_step(data, batch, step_seed);
    const double w = static_cast<double>(batch.size());
    mean.variety += w * b.variety;
    mean.env_col += w * b.env_col;
    mean.map_nce += w * b.map_nce;
    mean.total += w * b.total;
    mean.colliding_fraction += w * b.colliding_fraction;
    seen += batch.size();
  }
  if (seen > 0) {
    const double inv = 1.0 / static_cast<double>(seen);
    mean.variety *= inv;
    mean.env_col *= inv;
    mean.map_nce *= inv;
    mean.total *= inv;
    mean.colliding_fraction *= inv;
  }
  ++epoch_;
  return mean;
}

nlohmann::json Trainer::checkpoint() const
{
  std::vector<const nn::Param *> head_params;
  head_.visit([&](const nn::Param & p) { head_params.push_back(&p); });
  std::vector<nn::Param> vel;
  std::size_t i = 0;
  visit([&](const nn::Param & p) {
    nn::Param v;
    v.name = p.name;
    v.value = velocity_[i++];
    vel.push_back(std::move(v));
  });
  std::vector<const nn::Param *> vel_ptrs;
  for (const auto & v : vel) {
    vel_ptrs.push_back(&v);
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", cfg_.to_json()},
          {"predictor", predictor_to_json(model_)},
          {"mapnce_head", params_to_json(head_params)},
          {"optimizer", {{"step", step_}, {"epoch", epoch_}, {"velocity", params_to_json(vel_ptrs)}}}};
}

Trainer Trainer::from_checkpoint(const nlohmann::json & j)
{
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat || j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint format/version");
    }
    Trainer t(TrainConfig::from_json(j.at("config")));
    t.model_ = predictor_from_json(j.at("predictor"));
    std::vector<nn::Param *> head_params;
    t.head_.visit([&](nn::Param & p) { head_params.push_back(&p); });
    params_from_json(j.at("mapnce_head"), head_params);
    const auto & opt = j.at("optimizer");
    t.step_ = opt.at("step").get<std::int64_t>();
    t.epoch_ = opt.at("epoch").get<int>();
    std::vector<nn::Param> vel;
    t.visit([&](const nn::Param & p) { vel.emplace_back(p.name, p.value.rows(), p.value.cols()); });
    std::vector<nn::Param *> vel_ptrs;
    for (auto & v : vel) {
      vel_ptrs.push_back(&v);
    }
    params_from_json(opt.at("velocity"), vel_ptrs);
    for (std::size_t i = 0; i < vel.size(); ++i) {
      t.velocity_[i] = vel[i].value;
    }
    return t;
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void Trainer::save(const std::filesystem::path & file) const
{
  std::ofstream out(file);
  if (!out) {
    throw FormatError("cannot write checkpoint " + file.string());
  }
  out << checkpoint().dump() << "\n";
}

Trainer Trainer::load(const std::filesystem::path & file)
{
  std::ifstream in(file);
  if (!in) {
    throw FormatError("cannot open checkpoint " + file.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  return from_checkpoint(j);
}

nlohmann::json GradCheckReport::to_json() const
{
  nlohmann::json params = nlohmann::json::object();
  for (const auto & [name, err] : per_param) {
    params[name] = err;
  }
  return {{"max_rel_error", max_rel_error}, {"worst_param", worst_param}, {"checked", checked},
          {"excluded", excluded}, {"per_param", params}, {"loss", base.breakdown.to_json()}};
}

GradCheckReport check_gradients(Trainer & trainer, const TrainingSet & data, std::span<const std::size_t> batch,
                                std::uint64_t step_seed, double step, double floor)
{
  GradCheckReport report;
  report.base = trainer.objective(data, batch, step_seed, true);
  std::vector<nn::Param *> params;
  trainer.visit([&](nn::Param & p) { params.push_back(&p); });
  std::vector<nn::Matrix> analytic;
  for (const auto * p : params) {
    analytic.push_back(p->grad);
  }
  const auto same_gates = [&](const ObjectiveResult & r) {
    return r.collisions == report.base.collisions && r.variety_argmin == report.base.variety_argmin;
  };
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    nn::Param & p = *params[pi];
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double & x = p.value.data()[i];
      const double orig = x;
      x = orig + step;
      const ObjectiveResult plus = trainer.objective(data, batch, step_seed, false);
      x = orig - step;
      const ObjectiveResult minus = trainer.objective(data, batch, step_seed, false);
      x = orig;
      if (!same_gates(plus) || !same_gates(minus)) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus.breakdown.total - minus.breakdown.total) / (2.0 * step);
      const double a = analytic[pi].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, rel);
      ++report.checked;
    }
    report.per_param.emplace_back(p.name, worst);
    if (worst >= report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst_param = p.name;
    }
  }
  return report;
}

MetricsReport evaluate(const Predictor & model, const std::vector<Scene> & scenes, int k, std::uint64_t seed)
{
  if (k < 1) {
    throw ValidationError("K must be >= 1");
  }
  MetricsAccumulator acc;
  std::uint64_t global = 0;
  for (const auto & scene : scenes) {
    for (std::size_t start = 0; start < scene.windows.size(); start += kEvalBatch) {
      const std::size_t end = std::min(scene.windows.size(), start + kEvalBatch);
      std::vector<WindowInput> inputs;
      std::vector<nn::Matrix> noise;
      std::vector<Trajectory> gt;
      for (std::size_t i = start; i < end; ++i) {
        inputs.push_back(prepare_input(scene.windows[i], &scene.map, model.config()));
        Rng rng = make_stream(seed, Stream::kDecoderNoise, global++);
        noise.push_back(draw_noise(model.config().noise_dim, k, rng));
        gt.push_back(scene.windows[i].future);
      }
      const ForwardTrace tr = model.forward(inputs, noise);
      acc.add(tr.predictions, gt, scene.map, scene.label);
    }
  }
  return acc.report();
}

}  // namespace ecam
