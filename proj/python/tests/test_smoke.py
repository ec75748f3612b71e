import math

import numpy as np
import pytest

import rangeloc


def test_lie_round_trips():
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = rng.normal(size=3)
        w *= 2.5 / max(np.linalg.norm(w), 1.0)
        R = rangeloc.exp_so3(w)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.allclose(rangeloc.log_so3(R), w, atol=1e-9)
        eps = np.concatenate([w, rng.normal(size=3)])
        assert np.allclose(rangeloc.log_se3(rangeloc.exp_se3(eps)), eps, atol=1e-9)


def test_pseudo_huber_closed_form():
    value, slope = rangeloc.pseudo_huber(1.0, 1.0)
    assert value == pytest.approx(math.sqrt(2.0) - 1.0)
    assert slope == pytest.approx(1.0 / math.sqrt(2.0))


def test_presets_and_config():
    assert "paper-indoor" in rangeloc.preset_names()
    anchors = rangeloc.preset_anchors("paper-indoor")
    assert anchors.shape == (4, 4)
    assert np.allclose(anchors[0, 1:], [3.0, 3.0, 1.95])
    cfg = rangeloc.Config("paper-indoor")
    cfg.set("estimator.window", "12")
    assert "estimator.window = 12" in cfg.to_text()
    with pytest.raises(rangeloc.ConfigError):
        cfg.set("estimator.nope", "1")


def test_simulate_localize_evaluate():
    cfg = rangeloc.Config("paper-indoor")
    cfg.set("sim.duration", "8")
    cfg.set("estimator.gamma", "10")
    sim = rangeloc.simulate(cfg, seed=3)
    again = rangeloc.simulate(cfg, seed=3)
    assert np.array_equal(sim["ranges"], again["ranges"])
    assert sim["ranges"].shape[1] == 3
    assert sim["orientations"].shape[1] == 10

    run = rangeloc.localize(cfg, sim["anchors"], sim["ranges"])
    assert run["estimates"].shape[0] > 200
    m = rangeloc.metrics(run["estimates"], sim["truth"])
    assert 0.0 <= m["E_T"] <= m["E_RMSE"] < 0.3


def test_fused_mode_returns_rotations():
    cfg = rangeloc.Config("paper-indoor")
    cfg.set("sim.duration", "4")
    cfg.set("sim.sigma_o", "0.005")
    cfg.set("estimator.mode", "fused")
    sim = rangeloc.simulate(cfg, seed=1)
    run = rangeloc.localize(cfg, sim["anchors"], sim["ranges"], sim["orientations"])
    assert len(run["rotations"]) == run["estimates"].shape[0] > 0
    for R in run["rotations"]:
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-9)


def test_coplanar_anchors_rejected():
    cfg = rangeloc.Config("paper-indoor")
    flat = np.array([[0, 0, 0, 0], [1, 1, 0, 0], [2, 0, 1, 0], [3, 1, 1, 0]], dtype=float)
    with pytest.raises(rangeloc.InsufficientGeometry):
        rangeloc.localize(cfg, flat, np.zeros((0, 3)))
