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

#include "ecam/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "ecam/errors.hpp"
#include "ecam/metrics.hpp"
#include "ecam/rng.hpp"
#include "ecam/viz.hpp"

namespace ecam::cli
{

namespace
{

constexpr const char * kOracleFormat = "ecam-oracle";

nlohmann::json read_json(const fs::path & file, const std::string & what)
{
  std::ifstream in(file);
  if (!in) {
    throw ValidationError(what + " not found: " + file.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error & e) {
    throw FormatError(what + " " + file.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path & file, const std::string & text)
{
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write " + file.string());
  }
  out << text;
}

std::vector<Scene> load_filtered(const fs::path & manifest, const WindowConfig & windows, const SceneFilter & f)
{
  return load_scenes(load_manifest(manifest), windows, f.only, f.exclude);
}

/// Either a trained predictor or the ground-truth oracle.
struct Model
{
  bool oracle{false};
  std::string label;
  WindowConfig windows{};
  Predictor predictor;
};

Model load_model(const fs::path & checkpoint)
{
  const nlohmann::json j = read_json(checkpoint, "checkpoint");
  Model m;
  if (j.value("format", std::string{}) == kOracleFormat) {
    m.oracle = true;
    m.label = "oracle";
    m.windows = WindowConfig{j.value("obs_len", 8), j.value("pred_len", 12), j.value("window_stride", 1)};
    return m;
  }
  const Trainer t = Trainer::from_checkpoint(j);
  m.label = ablation_name(t.config().ablation);
  m.windows = t.config().windows();
  m.predictor = t.model();
  return m;
}

PredictionSet oracle_predictions(std::span<const TrajectoryWindow> windows, int k)
{
  PredictionSet p;
  for (const auto & w : windows) {
    p.samples.emplace_back(static_cast<std::size_t>(k), w.future);
  }
  return p;
}

MetricsReport oracle_report(const std::vector<Scene> & scenes, int k)
{
  MetricsAccumulator acc;
  for (const auto & s : scenes) {
    if (s.windows.empty()) {
      continue;
    }
    std::vector<Trajectory> gt;
    for (const auto & w : s.windows) {
      gt.push_back(w.future);
    }
    acc.add(oracle_predictions(s.windows, k), gt, s.map, s.label);
  }
  return acc.report();
}

nlohmann::json mean_std(const std::vector<double> & v)
{
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : v) {
    ss += (x - mean) * (x - mean);
  }
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {{"mean", mean}, {"std", sd}};
}

nlohmann::json summarize(const std::vector<double> & ade, const std::vector<double> & fde,
                         const std::vector<double> & ecfl_values)
{
  std::vector<double> coll;
  for (const double e : ecfl_values) {
    coll.push_back(100.0 - e);
  }
  return {{"ade_min", mean_std(ade)}, {"fde_min", mean_std(fde)}, {"ecfl", mean_std(ecfl_values)},
          {"collision_pct", mean_std(coll)}};
}

int busiest_frame(std::span<const TrajectoryWindow> windows)
{
  std::map<int, int> counts;
  for (const auto & w : windows) {
    ++counts[w.start_frame];
  }
  int best = 0;
  int best_count = -1;
  for (const auto & [frame, count] : counts) {
    if (count > best_count) {
      best = frame;
      best_count = count;
    }
  }
  return best;
}

std::string fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string row_name(const std::string & ablation)
{
  static const std::map<std::string, std::string> names{{"baseline", "Baseline"},  {"map", "+MAP"},
                                                        {"envcol", "+EnvColLoss"}, {"mapnce", "+MapNCE"},
                                                        {"ecam", "+ECAM"}};
  const auto it = names.find(ablation);
  return it == names.end() ? ablation : it->second;
}

nlohmann::json parse_value(const std::string & text)
{
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &) {
    return text;
  }
}

}  // namespace

Manifest cmd_synth(const SynthOptions & opt)
{
  if (opt.count < 1) {
    throw ValidationError("scene count must be at least 1");
  }
  opt.spec.validate();
  Manifest manifest;
  for (int i = 0; i < opt.count; ++i) {
    SceneSpec spec = opt.spec;
    spec.seed = opt.count == 1 ? opt.spec.seed : derive_seed(opt.spec.seed, {static_cast<std::uint64_t>(i)});
    const GeneratedScene scene = generate_scene(spec);
    manifest.scenes.push_back(write_scene(scene, opt.out_dir, layout_name(spec.layout) + "_" + std::to_string(i)));
  }
  write_manifest(manifest, opt.out_dir / "manifest.json");
  return manifest;
}

TrainOutcome cmd_train(const TrainOptions & opt)
{
  fs::create_directories(opt.out_dir);
  TrainOutcome res;
  res.checkpoint = opt.out_dir / "checkpoint.json";
  res.log = opt.out_dir / "train_log.jsonl";

  Trainer trainer = opt.resume ? Trainer::load(*opt.resume) : Trainer(opt.config);
  if (opt.resume) {
    trainer.set_epochs(opt.config.epochs);
  } else if (opt.patch_encoder) {
    load_patch_encoder(trainer.model(), read_json(*opt.patch_encoder, "patch encoder"));
  }
  const TrainConfig & cfg = trainer.config();
  const TrainingSet data(load_filtered(opt.manifest, cfg.windows(), opt.scenes), cfg.model);
  if (data.size() == 0) {
    throw ValidationError("no training windows in " + opt.manifest.string());
  }

  std::ofstream log(res.log, opt.resume ? std::ios::app : std::ios::trunc);
  if (!log) {
    throw ValidationError("cannot write " + res.log.string());
  }
  while (trainer.epoch() < cfg.epochs) {
    LossBreakdown b;
    try {
      b = trainer.train_epoch(data);
    } catch (const DivergenceError & e) {
      write_text(opt.out_dir / "divergence.json", e.diagnostic().dump(2) + "\n");
      throw;
    }
    nlohmann::json line = b.to_json();
    line["epoch"] = trainer.epoch();
    line["step"] = trainer.step_count();
    line["ablation"] = ablation_name(cfg.ablation);
    log << line.dump() << '\n';
    log.flush();
    trainer.save(res.checkpoint);
    res.epochs.push_back(b);
  }
  if (!fs::exists(res.checkpoint)) {
    trainer.save(res.checkpoint);
  }
  return res;
}

nlohmann::json cmd_eval(const EvalOptions & opt)
{
  if (opt.k < 1 || opt.runs < 1) {
    throw ValidationError("k and runs must be positive");
  }
  const Model model = load_model(opt.checkpoint);
  const std::vector<Scene> scenes = load_filtered(opt.manifest, model.windows, opt.scenes);

  std::vector<MetricsReport> reports;
  for (int r = 0; r < opt.runs; ++r) {
    const std::uint64_t seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(r)});
    reports.push_back(model.oracle ? oracle_report(scenes, opt.k) : evaluate(model.predictor, scenes, opt.k, seed));
  }

  std::vector<double> ade;
  std::vector<double> fde;
  std::vector<double> ecfl_values;
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto & r : reports) {
    ade.push_back(r.ade_min);
    fde.push_back(r.fde_min);
    ecfl_values.push_back(r.ecfl);
    per_run.push_back(r.to_json(opt.per_scene));
  }
  nlohmann::json out{{"ablation", model.label},
                     {"runs", opt.runs},
                     {"k_samples", opt.k},
                     {"seed", opt.seed},
                     {"n_pedestrians", reports.front().n_pedestrians},
                     {"metrics", summarize(ade, fde, ecfl_values)},
                     {"per_run", per_run}};
  if (opt.per_scene) {
    nlohmann::json scenes_json = nlohmann::json::object();
    for (const auto & [label, first] : reports.front().per_scene) {
      std::vector<double> a;
      std::vector<double> f;
      std::vector<double> e;
      for (const auto & r : reports) {
        const SceneMetrics & m = r.per_scene.at(label);
        a.push_back(m.ade_min);
        f.push_back(m.fde_min);
        e.push_back(m.ecfl);
      }
      scenes_json[label] = summarize(a, f, e);
      scenes_json[label]["n_pedestrians"] = first.n_pedestrians;
    }
    out["per_scene"] = scenes_json;
  }
  return out;
}

std::string cmd_viz(const VizOptions & opt)
{
  if (opt.k < 0) {
    throw ValidationError("k must be non-negative");
  }
  const Model model = load_model(opt.checkpoint);
  const SceneFilter filter{opt.scene, std::nullopt};
  const std::vector<Scene> scenes = load_filtered(opt.manifest, model.windows, filter);
  if (scenes.empty()) {
    throw ValidationError(opt.scene ? "scene '" + *opt.scene + "' not in manifest" : "manifest has no scenes");
  }
  const Scene & scene = scenes.front();
  const int frame = opt.frame.value_or(busiest_frame(scene.windows));
  std::vector<TrajectoryWindow> windows;
  for (const auto & w : scene.windows) {
    if (w.start_frame == frame) {
      windows.push_back(w);
    }
  }
  PredictionSet preds;
  if (opt.k > 0 && !windows.empty()) {
    if (model.oracle) {
      preds = oracle_predictions(windows, opt.k);
    } else {
      for (std::size_t i = 0; i < windows.size(); ++i) {
        const WindowInput in = prepare_input(windows[i], &scene.map, model.predictor.config());
        Rng rng = make_stream(opt.seed, Stream::kDecoderNoise, i);
        preds.samples.push_back(model.predictor.predict(in, opt.k, rng));
      }
    }
  }
  SvgOptions svg;
  svg.scale = opt.scale;
  const std::string text = render_svg(scene.map, windows, preds, svg);
  write_text(opt.out, text);
  return text;
}

std::string cmd_report(const std::vector<fs::path> & eval_files)
{
  struct Row
  {
    int files{0};
    double ade{0.0};
    double fde{0.0};
    double ecfl{0.0};
  };
  std::map<std::string, Row> rows;
  for (const auto & f : eval_files) {
    const nlohmann::json j = read_json(f, "eval report");
    if (!j.contains("ablation") || !j.contains("metrics")) {
      throw FormatError(f.string() + " is not an eval report");
    }
    Row & r = rows[j.at("ablation").get<std::string>()];
    const auto & m = j.at("metrics");
    ++r.files;
    r.ade += m.at("ade_min").at("mean").get<double>();
    r.fde += m.at("fde_min").at("mean").get<double>();
    r.ecfl += m.at("ecfl").at("mean").get<double>();
  }
  std::vector<std::string> order;
  for (const auto a : all_ablations()) {
    if (rows.count(ablation_name(a))) {
      order.push_back(ablation_name(a));
    }
  }
  for (const auto & [name, _] : rows) {
    if (std::find(order.begin(), order.end(), name) == order.end()) {
      order.push_back(name);
    }
  }
  const auto baseline = rows.find("baseline");
  const double base_coll =
      baseline == rows.end() ? -1.0 : 100.0 - baseline->second.ecfl / baseline->second.files;

  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %5s %9s %9s %8s %8s %10s\n", "Model", "runs", "ADE_min", "FDE_min",
                "ECFL", "Coll%", "dColl%");
  os << buf;
  for (const auto & name : order) {
    const Row & r = rows.at(name);
    const double n = r.files;
    const double coll = 100.0 - r.ecfl / n;
    std::string rel = "-";
    if (base_coll > 0.0 && name != "baseline") {
      rel = fixed(100.0 * (coll - base_coll) / base_coll, 1);
    }
    std::snprintf(buf, sizeof(buf), "%-14s %5d %9s %9s %8s %8s %10s\n", row_name(name).c_str(), r.files,
                  fixed(r.ade / n, 3).c_str(), fixed(r.fde / n, 3).c_str(), fixed(r.ecfl / n, 2).c_str(),
                  fixed(coll, 2).c_str(), rel.c_str());
    os << buf;
  }
  return os.str();
}

std::vector<double> cmd_pretrain_patch(const PretrainOptions & opt)
{
  TrainConfig cfg = opt.config;
  cfg.model.use_map = true;
  const TrainingSet data(load_filtered(opt.manifest, cfg.windows(), opt.scenes), cfg.model);
  std::vector<WindowInput> inputs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    inputs.push_back(data.item(i).input);
  }
  Predictor model(cfg.model, cfg.seed);
  PretrainConfig pc = opt.pretrain;
  pc.seed = cfg.seed;
  const std::vector<double> losses = pretrain_patch_encoder(model, inputs, pc);
  nlohmann::json j = patch_encoder_to_json(model);
  j["loss"] = losses;
  write_text(opt.out, j.dump() + "\n");
  return losses;
}

TrainConfig gradcheck_fixture_config()
{
  TrainConfig c;
  c.model.hidden = 16;
  c.model.history_hidden = 16;
  c.model.decoder_hidden = 16;
  c.model.noise_dim = 4;
  c.nce.embed_dim = 8;
  c.nce.key_hidden = 8;
  c.sampling.z_seeds = 2;
  c.k_samples = 4;
  return c;
}

Scene gradcheck_fixture_scene(std::uint64_t seed)
{
  SceneSpec spec;
  spec.width_m = 12.0;
  spec.height_m = 12.0;
  spec.density = 0.5;
  spec.pedestrians = 12;
  spec.seed = seed;
  const GeneratedScene g = generate_scene(spec);
  return Scene{"fixture", g.map, g.series, g.windows};
}

GradcheckOutcome cmd_gradcheck(const GradcheckOptions & opt)
{
  if (opt.batch < 1) {
    throw ValidationError("batch must be positive");
  }
  std::vector<Scene> scenes;
  if (opt.manifest) {
    scenes = load_filtered(*opt.manifest, opt.config.windows(), {});
  } else {
    scenes.push_back(gradcheck_fixture_scene(opt.seed));
  }
  const std::vector<Ablation> ablations = opt.ablations.empty() ? all_ablations() : opt.ablations;
  GradcheckOutcome out;
  for (const auto a : ablations) {
    TrainConfig cfg = opt.config;
    cfg.ablation = a;
    cfg.seed = opt.seed;
    cfg.apply_ablation();
    const TrainingSet data(scenes, cfg.model);
    if (data.size() == 0) {
      throw ValidationError("gradcheck needs at least one window");
    }
    Trainer trainer(cfg);
    // Spread the batch over the data set, shifting it until some sample
    // collides so that the collision gate is exercised.
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(opt.batch), data.size());
    std::vector<std::size_t> batch;
    for (std::size_t shift = 0; shift < std::min<std::size_t>(data.size(), 64); ++shift) {
      std::vector<std::size_t> candidate;
      for (std::size_t i = 0; i < n; ++i) {
        candidate.push_back((shift + i * data.size() / n) % data.size());
      }
      const ObjectiveResult probe = trainer.objective(data, candidate, opt.seed, false);
      const bool any = std::any_of(probe.collisions.begin(), probe.collisions.end(), [](const auto & row) {
        return std::find(row.begin(), row.end(), std::uint8_t{1}) != row.end();
      });
      if (batch.empty() || any) {
        batch = candidate;
      }
      if (any) {
        break;
      }
    }
    GradCheckReport report = check_gradients(trainer, data, batch, opt.seed, opt.step, opt.tolerance);
    out.passed = out.passed && report.passed(opt.tolerance);
    out.reports.emplace_back(a, std::move(report));
  }
  return out;
}

void apply_overrides(nlohmann::json & config, const std::vector<std::string> & overrides)
{
  for (const auto & o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("override '" + o + "' is not key=value");
    }
    config[o.substr(0, eq)] = parse_value(o.substr(eq + 1));
  }
}

int run(int argc, const char * const * argv, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Trajectory prediction with environment-aware training losses"};
  app.require_subcommand(1);

  // Shared training-config options.
  struct ConfigArgs
  {
    std::string file;
    std::vector<std::string> set;
    std::string ablation;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<int> batch_size;
    std::optional<int> k;
    std::optional<std::uint64_t> seed;
  };
  const auto add_config = [](CLI::App * sub, ConfigArgs & c) {
    sub->add_option("--config", c.file, "JSON config (flat key namespace)")->check(CLI::ExistingFile);
    sub->add_option("--set", c.set, "Override a config key: key=value")->take_all();
    sub->add_option("--ablation", c.ablation, "baseline|map|envcol|mapnce|ecam");
    sub->add_option("--epochs", c.epochs);
    sub->add_option("--lr", c.lr);
    sub->add_option("--batch-size", c.batch_size);
    sub->add_option("--k", c.k, "Samples per pedestrian during training");
  };
  const auto build_config = [](const ConfigArgs & c, const nlohmann::json & base = nlohmann::json::object()) {
    nlohmann::json j = base;
    if (!c.file.empty()) {
      j.update(read_json(c.file, "config"));
    }
    apply_overrides(j, c.set);
    if (!c.ablation.empty()) {
      j["ablation"] = c.ablation;
      j.erase("use_map");
      j.erase("use_env_col_loss");
      j.erase("use_map_nce");
    }
    if (c.epochs) j["epochs"] = *c.epochs;
    if (c.lr) j["lr"] = *c.lr;
    if (c.batch_size) j["batch_size"] = *c.batch_size;
    if (c.k) j["k_samples"] = *c.k;
    if (c.seed) j["seed"] = *c.seed;
    return TrainConfig::from_json(j);
  };

  // synth
  SynthOptions synth;
  std::string layout = "corridor";
  auto * s = app.add_subcommand("synth", "Generate synthetic scenes and a manifest");
  s->add_option("--layout", layout, "corridor|rooms|random-blocks");
  s->add_option("--seed", synth.spec.seed);
  s->add_option("--count", synth.count, "Number of scenes");
  s->add_option("--out", synth.out_dir, "Output directory");
  s->add_option("--width", synth.spec.width_m, "Map width (m)");
  s->add_option("--height", synth.spec.height_m, "Map height (m)");
  s->add_option("--resolution", synth.spec.meters_per_pixel, "Metres per pixel");
  s->add_option("--density", synth.spec.density, "Obstacle area fraction");
  s->add_option("--pedestrians", synth.spec.pedestrians);
  s->add_option("--speed-min", synth.spec.speed_min);
  s->add_option("--speed-max", synth.spec.speed_max);
  s->add_option("--dt", synth.spec.timestep_s);
  s->add_option("--clearance", synth.spec.clearance_m);
  s->add_option("--jitter", synth.spec.jitter_m);

  // train
  TrainOptions train;
  ConfigArgs train_cfg;
  std::string train_resume;
  std::string train_encoder;
  auto * t = app.add_subcommand("train", "Train a predictor");
  add_config(t, train_cfg);
  t->add_option("--seed", train_cfg.seed)->required();
  t->add_option("--manifest", train.manifest)->required();
  t->add_option("--out", train.out_dir, "Run directory");
  t->add_option("--scene", train.scenes.only, "Train on this scene only");
  t->add_option("--exclude-scene", train.scenes.exclude, "Leave this scene out");
  t->add_option("--resume", train_resume, "Continue from a checkpoint");
  t->add_option("--patch-encoder", train_encoder, "Initialise the conv stack from pretrain-patch output");

  // eval
  EvalOptions eval;
  std::string eval_out;
  auto * e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--manifest", eval.manifest)->required();
  e->add_option("--k", eval.k);
  e->add_option("--runs", eval.runs, "Re-sample predictions R times and report mean and std");
  e->add_option("--seed", eval.seed);
  e->add_flag("--per-scene", eval.per_scene);
  e->add_option("--scene", eval.scenes.only);
  e->add_option("--exclude-scene", eval.scenes.exclude);
  e->add_option("--out", eval_out, "Also write the report here");

  // viz
  VizOptions viz;
  auto * v = app.add_subcommand("viz", "Render predictions over the map as SVG");
  v->add_option("--checkpoint", viz.checkpoint)->required();
  v->add_option("--manifest", viz.manifest)->required();
  v->add_option("--out", viz.out);
  v->add_option("--scene", viz.scene);
  v->add_option("--frame", viz.frame, "Start frame of the windows to draw");
  v->add_option("--k", viz.k);
  v->add_option("--seed", viz.seed);
  v->add_option("--scale", viz.scale, "Output pixels per map cell");

  // report
  std::vector<fs::path> report_files;
  auto * r = app.add_subcommand("report", "Ablation table from eval reports");
  r->add_option("reports", report_files, "eval JSON files")->required();

  // pretrain-patch
  PretrainOptions pre;
  ConfigArgs pre_cfg;
  auto * p = app.add_subcommand("pretrain-patch", "Pretrain the map-patch encoder as an autoencoder");
  add_config(p, pre_cfg);
  p->add_option("--seed", pre_cfg.seed);
  p->add_option("--manifest", pre.manifest)->required();
  p->add_option("--out", pre.out);
  p->add_option("--pretrain-epochs", pre.pretrain.epochs);
  p->add_option("--pretrain-lr", pre.pretrain.lr);

  // gradcheck
  GradcheckOptions grad;
  ConfigArgs grad_cfg;
  std::string grad_manifest;
  std::vector<std::string> grad_ablations;
  std::string grad_out;
  auto * g = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_config(g, grad_cfg);
  g->add_option("--seed", grad.seed);
  g->add_option("--manifest", grad_manifest, "Scenes to draw the batch from (default: built-in fixture)");
  g->add_option("--check", grad_ablations, "Ablations to check (default: all)");
  g->add_option("--batch", grad.batch);
  g->add_option("--step", grad.step);
  g->add_option("--tol", grad.tolerance);
  g->add_option("--out", grad_out, "Write the full report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*s) {
      synth.spec.layout = parse_layout(layout);
      const Manifest m = cmd_synth(synth);
      out << "wrote " << m.scenes.size() << " scene(s) to " << (synth.out_dir / "manifest.json").string() << '\n';
    } else if (*t) {
      train.config = build_config(train_cfg);
      if (!train_resume.empty()) {
        train.resume = train_resume;
      }
      if (!train_encoder.empty()) {
        train.patch_encoder = train_encoder;
      }
      const TrainOutcome res = cmd_train(train);
      out << "trained " << res.epochs.size() << " epoch(s); checkpoint " << res.checkpoint.string() << '\n';
    } else if (*e) {
      const nlohmann::json j = cmd_eval(eval);
      if (!eval_out.empty()) {
        write_text(eval_out, j.dump(2) + "\n");
      }
      out << j.dump(2) << '\n';
    } else if (*v) {
      cmd_viz(viz);
      out << "wrote " << viz.out.string() << '\n';
    } else if (*r) {
      out << cmd_report(report_files);
    } else if (*p) {
      pre.config = build_config(pre_cfg);
      const auto losses = cmd_pretrain_patch(pre);
      for (std::size_t i = 0; i < losses.size(); ++i) {
        out << "epoch " << i + 1 << " reconstruction mse " << losses[i] << '\n';
      }
    } else if (*g) {
      nlohmann::json base = gradcheck_fixture_config().to_json();
      base.erase("ablation");
      base.erase("use_map");
      base.erase("use_env_col_loss");
      base.erase("use_map_nce");
      grad.config = build_config(grad_cfg, base);
      if (!grad_manifest.empty()) {
        grad.manifest = grad_manifest;
      }
      for (const auto & name : grad_ablations) {
        grad.ablations.push_back(parse_ablation(name));
      }
      const GradcheckOutcome res = cmd_gradcheck(grad);
      nlohmann::json all = nlohmann::json::array();
      for (const auto & [a, rep] : res.reports) {
        out << ablation_name(a) << ": max_rel_error=" << rep.max_rel_error << " worst=" << rep.worst_param
            << " checked=" << rep.checked << " excluded=" << rep.excluded << ' '
            << (rep.passed(grad.tolerance) ? "PASS" : "FAIL") << '\n';
        nlohmann::json j = rep.to_json();
        j["ablation"] = ablation_name(a);
        std::size_t colliding = 0;
        for (const auto & row : rep.base.collisions) {
          colliding += static_cast<std::size_t>(std::count(row.begin(), row.end(), std::uint8_t{1}));
        }
        j["colliding_samples"] = colliding;
        all.push_back(j);
      }
      if (!grad_out.empty()) {
        write_text(grad_out, all.dump(2) + "\n");
      }
      return res.passed ? 0 : 1;
    }
  } catch (const DivergenceError & ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception & ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ecam::cli
