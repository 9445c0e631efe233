# Copyright 2026 The ECAM Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math

import numpy as np
import pytest

import ecam


@pytest.fixture(scope="module")
def scene():
    return ecam.generate_scene("corridor", seed=3, width=12.0, height=12.0, density=0.3, pedestrians=15)


def test_scene_shapes(scene):
    assert scene["past"].shape[1:] == (8, 2)
    assert scene["future"].shape[1:] == (12, 2)
    assert scene["past"].shape[0] == scene["future"].shape[0] > 0
    m = scene["map"]
    assert m.cells.shape == (m.height, m.width) == (120, 120)
    assert np.allclose(m.homography, np.diag([10.0, 10.0, 1.0]))


def test_ground_truth_scores_perfectly(scene):
    preds = scene["future"][:, None]
    assert ecam.ade_fde_min(preds, scene["future"]) == (0.0, 0.0)
    assert ecam.ecfl(preds, scene["map"]) == 100.0
    assert not ecam.collision_mask(preds, scene["map"]).any()


def test_map_queries():
    cells = np.ones((4, 6), dtype=np.uint8)
    cells[1:3, 2:4] = 0
    m = ecam.OccupancyMap(cells, np.eye(3))
    assert m.is_obstacle(2.5, 1.5)
    assert not m.is_obstacle(0.5, 0.5)
    assert m.is_obstacle(-0.1, 0.5)  # outside the raster
    assert len(m.contours()) == 4
    assert m.world_to_pixel(1.0, 2.0) == (1.0, 2.0)


def test_losses_route_gradients(scene):
    gt = scene["future"][:3]
    rng = np.random.default_rng(0)
    preds = gt[:, None] + rng.normal(0.0, 0.5, size=(3, 4, 12, 2))
    value, grad, argmin = ecam.variety_loss(preds, gt)
    assert value > 0.0
    for i, best in enumerate(argmin):
        others = [k for k in range(4) if k != best]
        assert np.all(grad[i, others] == 0.0)
    env, env_grad = ecam.env_collision_loss(preds, gt, scene["map"])
    mask = ecam.collision_mask(preds, scene["map"])
    assert np.all(env_grad[~mask] == 0.0)
    assert (env > 0.0) == mask.any()


def test_mapnce_closed_forms():
    q = np.linspace(-1.0, 1.0, 16)
    keys = np.tile(np.linspace(0.5, -0.5, 16), (81, 1))
    loss, dq, dk = ecam.mapnce_loss(q, keys, 0.5)
    assert abs(loss - math.log(81.0)) < 1e-9
    assert dq.shape == (16,) and dk.shape == (81, 16)
    loss, _, _ = ecam.mapnce_loss(np.array([1.0, 0.0]), np.array([[0.5, 0.0], [0.0, 1.0]]), 0.5)
    assert abs(loss - math.log1p(math.exp(-1.0))) < 1e-12


def test_negative_geometry():
    seeds = np.array([[0.0, 0.0], [3.0, -1.0]])
    negs = ecam.expand_negatives(seeds, rho=0.5, c_eps=0.0)
    assert negs.shape == (16, 2)
    d = negs - np.repeat(seeds, 8, axis=0)
    assert np.allclose(np.hypot(d[:, 0], d[:, 1]), 0.5, atol=1e-12)
    angles = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
    assert np.allclose(angles, np.tile(np.arange(8) * np.pi / 4, 2), atol=1e-12)


def test_cli_train_and_predict(tmp_path, scene):
    code, out, err = ecam.run_cli(["synth", "--seed", "1", "--width", "12", "--height", "12", "--pedestrians",
                                   "12", "--density", "0.3", "--out", str(tmp_path / "s")])
    assert code == 0, err
    code, out, err = ecam.run_cli([
        "train", "--seed", "1", "--epochs", "1", "--k", "4", "--manifest", str(tmp_path / "s" / "manifest.json"),
        "--out", str(tmp_path / "run"), "--set", "hidden=16", "history_hidden=16", "decoder_hidden=16",
        "embed_dim=8", "key_hidden=8", "z_seeds=2"])
    assert code == 0, err
    model = ecam.Predictor.load(str(tmp_path / "run" / "checkpoint.json"))
    assert model.uses_map
    assert json.loads(model.config)["hidden"] == 16
    a = model.predict(scene["past"][0], scene["map"], k=5, seed=2)
    b = model.predict(scene["past"][0], scene["map"], k=5, seed=2)
    assert a.shape == (5, 12, 2)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        model.predict(scene["past"][0], None)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        ecam.generate_scene("corridor", density=0.9)
    with pytest.raises(ValueError):
        ecam.generate_scene("maze")
    with pytest.raises(OSError):
        ecam.Predictor.load("/nonexistent/checkpoint.json")
    code, _, err = ecam.run_cli(["eval", "--checkpoint", "missing.json", "--manifest", "missing.json"])
    assert code == 1 and "missing.json" in err
