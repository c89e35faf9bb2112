import json
import math

import numpy as np
import pytest

from smm_placer.collision import ridge_contains
from smm_placer.errors import ParseError
from smm_placer.kinematics import rot_x, rot_y, translation
from smm_placer.scenario import (
    CanopyConfig,
    generate_task,
    load_task,
    sample_pepper,
    save_task,
)


def recover_deltas(pepper):
    """Invert P = T·Rx(pi/2+d1)·Ry(pi/2+d2) from the rotation (test oracle)."""
    R = pepper.rotation
    col2 = R[:, 1]  # = Rx(pi/2+d1) e_y
    d1 = math.atan2(col2[2], col2[1]) - math.pi / 2
    M = rot_x(math.pi / 2 + d1).rotation.T @ R
    d2 = math.atan2(M[0, 2], M[0, 0]) - math.pi / 2
    return d1, d2


class TestSamplePepper:
    def test_zero_noise_structure(self):
        cfg = CanopyConfig(delta1_std=0.0, delta2_std=0.0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            pepper, peduncle = sample_pepper(cfg, rng)
            # with no noise the pepper y-axis maps to world +z
            np.testing.assert_allclose(peduncle.translation - pepper.translation,
                                       [0.0, 0.0, 0.12], atol=1e-12)

    def test_fixed_point_compose_oracle(self):
        # P at (1, 0, 0.4) with zero deltas: C lands at (1, 0, 0.52)
        half_pi = math.pi / 2
        pepper = translation(1, 0, 0.4).compose(rot_x(half_pi)).compose(rot_y(half_pi))
        peduncle = pepper.compose(translation(0, 0.12, 0))
        np.testing.assert_allclose(peduncle.translation, [1.0, 0.0, 0.52], atol=1e-15)

    def test_positions_inside_ridge(self):
        cfg = CanopyConfig()
        rng = np.random.default_rng(1)
        ridge = cfg.ridge
        for _ in range(500):
            pepper, _ = sample_pepper(cfg, rng)
            assert ridge_contains(ridge, pepper.translation)
            # margin keeps samples strictly interior
            assert pepper.translation[2] >= 0.02 - 1e-12

    def test_peduncle_offset_exact(self):
        cfg = CanopyConfig()
        rng = np.random.default_rng(2)
        off = translation(0.0, cfg.peduncle_offset, 0.0)
        for _ in range(200):
            pepper, peduncle = sample_pepper(cfg, rng)
            d = float(np.linalg.norm(peduncle.translation - pepper.translation))
            assert abs(d - 0.12) < 1e-15
            assert pepper.compose(off).almost_equal(peduncle, tol=0.0)

    def test_margin_too_large_rejected(self):
        cfg = CanopyConfig(margin=0.31)  # exceeds the half-width 0.3
        with pytest.raises(ValueError):
            sample_pepper(cfg, np.random.default_rng(0))

    def test_delta_std_recovery(self):
        cfg = CanopyConfig()
        rng = np.random.default_rng(3)
        d1s, d2s = [], []
        for _ in range(1500):
            pepper, _ = sample_pepper(cfg, rng)
            d1, d2 = recover_deltas(pepper)
            d1s.append(d1)
            d2s.append(d2)
        assert abs(np.std(d1s) - 0.35) / 0.35 < 0.15
        assert abs(np.std(d2s) - 0.5) / 0.5 < 0.15


class TestGenerateTask:
    def test_default_has_twenty_pairs(self):
        task = generate_task(CanopyConfig(), 9, "t9")
        assert len(task.pairs) == 20
        assert task.seed == 9 and task.id == "t9"
        assert task.obstacles.ground is not None
        assert task.obstacles.ridge is not None

    def test_same_seed_bit_identical(self):
        a = generate_task(CanopyConfig(), 5, "x")
        b = generate_task(CanopyConfig(), 5, "x")
        for (p1, c1), (p2, c2) in zip(a.pairs, b.pairs):
            assert p1.almost_equal(p2, tol=0.0)
            assert c1.almost_equal(c2, tol=0.0)

    def test_empty_task_valid(self):
        task = generate_task(CanopyConfig(n_targets=0), 1, "empty")
        assert task.pairs == ()


class TestTaskFiles:
    def test_roundtrip_exact(self, tmp_path):
        task = generate_task(CanopyConfig(n_targets=5), 21, "rt")
        path = tmp_path / "t.json"
        save_task(task, path)
        loaded = load_task(path)
        assert loaded.id == task.id
        assert loaded.seed == task.seed
        assert loaded.peduncle_offset == task.peduncle_offset
        assert loaded.obstacles.ridge_scope == task.obstacles.ridge_scope
        for (p1, c1), (p2, c2) in zip(task.pairs, loaded.pairs):
            assert p1.almost_equal(p2, tol=0.0)
            assert c1.almost_equal(c2, tol=0.0)

    def test_save_is_deterministic_bytes(self, tmp_path):
        task = generate_task(CanopyConfig(n_targets=4), 8, "bytes")
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_task(task, a)
        save_task(task, b)
        assert a.read_bytes() == b.read_bytes()

    def test_pepper_outside_ridge_rejected(self, tmp_path):
        task = generate_task(CanopyConfig(n_targets=2), 3, "bad")
        path = tmp_path / "t.json"
        save_task(task, path)
        doc = json.loads(path.read_text())
        doc["pairs"][0]["pepper"]["translation"] = [5.0, 0.0, 0.1]
        # keep the peduncle consistent so only the ridge check can fire
        doc["pairs"][0]["peduncle"]["translation"] = [
            v + w for v, w in zip([5.0, 0.0, 0.1],
                                  np.subtract(doc["pairs"][0]["peduncle"]["translation"],
                                              task.pairs[0][0].translation).tolist())]
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="outside the ridge"):
            load_task(path)

    def test_missing_obstacles_section(self, tmp_path):
        task = generate_task(CanopyConfig(n_targets=1), 3, "noobs")
        path = tmp_path / "t.json"
        save_task(task, path)
        doc = json.loads(path.read_text())
        del doc["obstacles"]
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="obstacles"):
            load_task(path)

    def test_inconsistent_peduncle_rejected(self, tmp_path):
        task = generate_task(CanopyConfig(n_targets=1), 3, "badc")
        path = tmp_path / "t.json"
        save_task(task, path)
        doc = json.loads(path.read_text())
        doc["pairs"][0]["peduncle"]["translation"][0] += 0.05
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="peduncle"):
            load_task(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError, match="invalid JSON"):
            load_task(path)
