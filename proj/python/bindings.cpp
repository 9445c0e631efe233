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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ecam/cli.hpp"
#include "ecam/errors.hpp"
#include "ecam/gridmap.hpp"
#include "ecam/losses.hpp"
#include "ecam/metrics.hpp"
#include "ecam/model.hpp"
#include "ecam/nce.hpp"
#include "ecam/sampling.hpp"
#include "ecam/synth.hpp"

namespace py = pybind11;
using namespace ecam;

namespace
{

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

void require_shape(const Array & a, std::initializer_list<py::ssize_t> shape, const char * what)
{
  bool ok = a.ndim() == static_cast<py::ssize_t>(shape.size());
  std::size_t i = 0;
  for (const auto s : shape) {
    ok = ok && (s < 0 || a.shape(i) == s);
    ++i;
  }
  if (!ok) {
    throw ShapeError(std::string(what) + " has the wrong shape");
  }
}

Trajectory to_trajectory(const Array & a)
{
  require_shape(a, {-1, 2}, "trajectory");
  Trajectory t(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    t[i] = Vec2(r(i, 0), r(i, 1));
  }
  return t;
}

Array from_trajectory(const Trajectory & t)
{
  Array a({static_cast<py::ssize_t>(t.size()), py::ssize_t{2}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.size(); ++i) {
    w(i, 0) = t[i].x();
    w(i, 1) = t[i].y();
  }
  return a;
}

// (N, K, T, 2) <-> PredictionSet
PredictionSet to_predictions(const Array & a)
{
  require_shape(a, {-1, -1, -1, 2}, "predictions");
  auto r = a.unchecked<4>();
  PredictionSet p;
  p.samples.resize(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (py::ssize_t k = 0; k < a.shape(1); ++k) {
      Trajectory t;
      for (py::ssize_t s = 0; s < a.shape(2); ++s) {
        t.emplace_back(r(i, k, s, 0), r(i, k, s, 1));
      }
      p.samples[i].push_back(std::move(t));
    }
  }
  return p;
}

Array from_predictions(const PredictionSet & p)
{
  const auto n = static_cast<py::ssize_t>(p.samples.size());
  const auto k = n ? static_cast<py::ssize_t>(p.samples[0].size()) : 0;
  const auto t = k ? static_cast<py::ssize_t>(p.samples[0][0].size()) : 0;
  Array a({n, k, t, py::ssize_t{2}});
  auto w = a.mutable_unchecked<4>();
  for (py::ssize_t i = 0; i < n; ++i) {
    for (py::ssize_t j = 0; j < k; ++j) {
      for (py::ssize_t s = 0; s < t; ++s) {
        w(i, j, s, 0) = p.samples[i][j][s].x();
        w(i, j, s, 1) = p.samples[i][j][s].y();
      }
    }
  }
  return a;
}

std::vector<Trajectory> to_ground_truth(const Array & a)
{
  require_shape(a, {-1, -1, 2}, "ground truth");
  auto r = a.unchecked<3>();
  std::vector<Trajectory> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (py::ssize_t s = 0; s < a.shape(1); ++s) {
      out[i].emplace_back(r(i, s, 0), r(i, s, 1));
    }
  }
  return out;
}

Eigen::Matrix3d to_matrix3(const Array & a)
{
  require_shape(a, {3, 3}, "homography");
  auto r = a.unchecked<2>();
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m(i, j) = r(i, j);
    }
  }
  return m;
}

Array from_matrix(const Eigen::MatrixXd & m)
{
  Array a({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  auto w = a.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      w(i, j) = m(i, j);
    }
  }
  return a;
}

OccupancyMap make_map(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> cells,
                      const Array & homography)
{
  if (cells.ndim() != 2) {
    throw ShapeError("cells must be a 2-D array");
  }
  const auto * p = cells.data();
  std::vector<std::uint8_t> v(p, p + cells.size());
  for (auto & c : v) {
    c = c ? 1 : 0;
  }
  return OccupancyMap(static_cast<int>(cells.shape(1)), static_cast<int>(cells.shape(0)), std::move(v),
                      to_matrix3(homography));
}

py::array_t<std::uint8_t> map_cells(const OccupancyMap & m)
{
  py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(m.height()), static_cast<py::ssize_t>(m.width())});
  std::copy(m.cells().begin(), m.cells().end(), a.mutable_data());
  return a;
}

py::dict scene_to_dict(const GeneratedScene & g)
{
  py::dict d;
  d["map"] = g.map;
  py::list series;
  for (const auto & s : g.series) {
    py::dict e;
    e["ped_id"] = s.ped_id;
    e["frames"] = s.frames;
    e["points"] = from_trajectory(s.points);
    series.append(e);
  }
  d["series"] = series;
  const auto n = static_cast<py::ssize_t>(g.windows.size());
  const auto obs = n ? static_cast<py::ssize_t>(g.windows[0].past.size()) : 0;
  const auto pred = n ? static_cast<py::ssize_t>(g.windows[0].future.size()) : 0;
  Array past({n, obs, py::ssize_t{2}});
  Array future({n, pred, py::ssize_t{2}});
  auto wp = past.mutable_unchecked<3>();
  auto wf = future.mutable_unchecked<3>();
  for (py::ssize_t i = 0; i < n; ++i) {
    for (py::ssize_t t = 0; t < obs; ++t) {
      wp(i, t, 0) = g.windows[i].past[t].x();
      wp(i, t, 1) = g.windows[i].past[t].y();
    }
    for (py::ssize_t t = 0; t < pred; ++t) {
      wf(i, t, 0) = g.windows[i].future[t].x();
      wf(i, t, 1) = g.windows[i].future[t].y();
    }
  }
  d["past"] = past;
  d["future"] = future;
  d["skipped_pedestrians"] = g.skipped_pedestrians;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ecam, m)
{
  m.doc() = "Trajectory prediction with environment-aware training losses";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ProjectionError>(m, "ProjectionError", PyExc_ValueError);

  py::class_<OccupancyMap>(m, "OccupancyMap")
    .def(py::init(&make_map), py::arg("cells"), py::arg("homography"),
         "cells: (H, W) array, non-zero = walkable; homography maps world to pixel coordinates")
    .def_property_readonly("width", &OccupancyMap::width)
    .def_property_readonly("height", &OccupancyMap::height)
    .def_property_readonly("cells", &map_cells)
    .def_property_readonly("homography", [](const OccupancyMap & map) { return from_matrix(map.homography()); })
    .def("is_obstacle", [](const OccupancyMap & map, double x, double y) { return is_obstacle(map, Vec2(x, y)); })
    .def("world_to_pixel",
         [](const OccupancyMap & map, double x, double y) {
           const Vec2 p = world_to_pixel(map, Vec2(x, y));
           return py::make_tuple(p.x(), p.y());
         })
    .def("contours",
         [](const OccupancyMap & map) {
           Trajectory pts;
           for (const auto & c : extract_contours(map)) {
             pts.push_back(c.position);
           }
           return from_trajectory(pts);
         },
         "World positions of obstacle cells that touch walkable space, as (M, 2)")
    .def("patch",
         [](const OccupancyMap & map, double x, double y, double heading, int size, double cell_size,
            double forward_offset) {
           PatchConfig cfg;
           cfg.size = size;
           cfg.cell_size = cell_size;
           cfg.forward_offset = forward_offset;
           const MapPatch p = extract_patch(map, Vec2(x, y), heading, cfg);
           py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(p.size), static_cast<py::ssize_t>(p.size)});
           std::copy(p.grid.begin(), p.grid.end(), a.mutable_data());
           return a;
         },
         py::arg("x"), py::arg("y"), py::arg("heading"), py::arg("size") = 32, py::arg("cell_size") = 0.25,
         py::arg("forward_offset") = 2.0);

  m.def("load_map", [](const std::filesystem::path & map, const std::filesystem::path & h) { return load_map(map, h); },
        py::arg("map_file"), py::arg("homography_file"));

  m.def(
    "generate_scene",
    [](const std::string & layout, std::uint64_t seed, double width, double height, double density, int pedestrians,
       double resolution) {
      SceneSpec spec;
      spec.layout = parse_layout(layout);
      spec.seed = seed;
      spec.width_m = width;
      spec.height_m = height;
      spec.density = density;
      spec.pedestrians = pedestrians;
      spec.meters_per_pixel = resolution;
      return scene_to_dict(generate_scene(spec));
    },
    py::arg("layout") = "corridor", py::arg("seed") = 0, py::arg("width") = 24.0, py::arg("height") = 24.0,
    py::arg("density") = 0.45, py::arg("pedestrians") = 40, py::arg("resolution") = 0.1,
    "Synthetic scene: dict with map, series, past (N, 8, 2) and future (N, 12, 2)");

  py::class_<Predictor>(m, "Predictor")
    .def_static("load", &load_predictor, py::arg("checkpoint"))
    .def_property_readonly("uses_map", [](const Predictor & p) { return p.config().use_map; })
    .def_property_readonly("config", [](const Predictor & p) { return p.config().to_json().dump(); })
    .def(
      "predict",
      [](const Predictor & p, const Array & past, const OccupancyMap * map, int k, std::uint64_t seed) {
        TrajectoryWindow w;
        w.past = to_trajectory(past);
        w.future.assign(static_cast<std::size_t>(p.config().pred_len), w.past.empty() ? Vec2::Zero() : w.past.back());
        if (p.config().use_map && !map) {
          throw ValidationError("this model needs a map");
        }
        Rng rng(seed);
        const std::vector<Trajectory> samples = p.predict(prepare_input(w, map, p.config()), k, rng);
        const auto t = static_cast<py::ssize_t>(p.config().pred_len);
        Array a({static_cast<py::ssize_t>(samples.size()), t, py::ssize_t{2}});
        auto out = a.mutable_unchecked<3>();
        for (std::size_t j = 0; j < samples.size(); ++j) {
          for (py::ssize_t s = 0; s < t; ++s) {
            out(j, s, 0) = samples[j][s].x();
            out(j, s, 1) = samples[j][s].y();
          }
        }
        return a;
      },
      py::arg("past"), py::arg("map") = nullptr, py::arg("k") = 20, py::arg("seed") = 0,
      "Samples K futures for one observed history; returns (K, T_pred, 2)");

  m.def(
    "ade_fde_min",
    [](const Array & preds, const Array & gt) {
      const auto r = ade_fde_min(to_predictions(preds), to_ground_truth(gt));
      return py::make_tuple(r.ade, r.fde);
    },
    py::arg("predictions"), py::arg("ground_truth"));
  m.def(
    "ecfl", [](const Array & preds, const OccupancyMap & map) { return ecfl(to_predictions(preds), map); },
    py::arg("predictions"), py::arg("map"));
  m.def(
    "collision_mask",
    [](const Array & preds, const OccupancyMap & map, bool segment_check) {
      const CollisionMask mask = collision_mask(to_predictions(preds), map, segment_check);
      const auto n = static_cast<py::ssize_t>(mask.size());
      const auto k = n ? static_cast<py::ssize_t>(mask[0].size()) : 0;
      py::array_t<bool> a({n, k});
      auto w = a.mutable_unchecked<2>();
      for (py::ssize_t i = 0; i < n; ++i) {
        for (py::ssize_t j = 0; j < k; ++j) {
          w(i, j) = mask[i][j] != 0;
        }
      }
      return a;
    },
    py::arg("predictions"), py::arg("map"), py::arg("segment_check") = false);

  m.def(
    "variety_loss",
    [](const Array & preds, const Array & gt) {
      const auto r = variety_loss(to_predictions(preds), to_ground_truth(gt));
      return py::make_tuple(r.value, from_predictions(r.grad), r.argmin);
    },
    py::arg("predictions"), py::arg("ground_truth"), "Returns (value, gradient, argmin)");
  m.def(
    "env_collision_loss",
    [](const Array & preds, const Array & gt, const OccupancyMap & map) {
      const auto r = env_collision_loss(to_predictions(preds), to_ground_truth(gt), map);
      return py::make_tuple(r.value, from_predictions(r.grad));
    },
    py::arg("predictions"), py::arg("ground_truth"), py::arg("map"), "Returns (value, gradient)");

  m.def(
    "mapnce_loss",
    [](const Array & query, const Array & keys, double tau) {
      require_shape(query, {-1}, "query");
      require_shape(keys, {-1, query.shape(0)}, "keys");
      ContrastiveBatch b;
      b.temperature = tau;
      b.query = Eigen::Map<const nn::Vector>(query.data(), query.shape(0));
      // keys arrive as (1 + J, E) rows; the library stores them as columns.
      b.keys = nn::Matrix(query.shape(0), keys.shape(0));
      auto r = keys.unchecked<2>();
      for (py::ssize_t j = 0; j < keys.shape(0); ++j) {
        for (py::ssize_t e = 0; e < keys.shape(1); ++e) {
          b.keys(e, j) = r(j, e);
        }
      }
      const NceLoss l = mapnce_loss(b);
      return py::make_tuple(l.loss, from_matrix(l.dquery).reshape({query.shape(0)}),
                            from_matrix(l.dkeys.transpose()));
    },
    py::arg("query"), py::arg("keys"), py::arg("tau") = 0.5,
    "keys: (1 + J, E), row 0 positive. Returns (loss, dquery, dkeys)");

  m.def(
    "expand_negatives",
    [](const Array & seeds, double rho, double c_eps, std::uint64_t seed) {
      std::vector<ContourPoint> pts;
      for (const auto & p : to_trajectory(seeds)) {
        pts.push_back(ContourPoint{p});
      }
      Rng rng(seed);
      return from_trajectory(expand_negatives(pts, rho, c_eps, rng));
    },
    py::arg("seeds"), py::arg("rho") = 0.5, py::arg("c_eps") = 0.05, py::arg("seed") = 0,
    "Eight points at distance rho around each seed, plus Gaussian noise; returns (8 Z, 2)");

  m.def(
    "run_cli",
    [](const std::vector<std::string> & args) {
      std::vector<std::string> all{"ecam"};
      all.insert(all.end(), args.begin(), args.end());
      std::vector<const char *> argv;
      for (const auto & a : all) {
        argv.push_back(a.c_str());
      }
      std::ostringstream out;
      std::ostringstream err;
      int code = 0;
      {
        py::gil_scoped_release release;
        code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
      }
      return py::make_tuple(code, out.str(), err.str());
    },
    py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr)");
}
