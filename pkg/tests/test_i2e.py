import math

import numpy as np
import pytest

from simdrive.errors import SchemaError
from simdrive.geometry import Transform4, default_camera_rig, image_to_ego_matrix
from simdrive.i2e import (
    MlpParams,
    embed_record_cameras,
    forward,
    grad_check,
    init_params,
    load_params,
    loss_and_gradients,
    save_params,
)


class TestInit:
    def test_same_seed_identical(self):
        a = init_params(3, 8, 4)
        b = init_params(3, 8, 4)
        assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)

    def test_biases_zero(self):
        p = init_params(0, 16, 8)
        assert not p.b1.any() and not p.b2.any()

    def test_weight_bounds(self):
        p = init_params(1, 64, 32)
        assert np.abs(p.W1).max() <= math.sqrt(6.0 / (16 + 64))
        assert np.abs(p.W2).max() <= math.sqrt(6.0 / (64 + 32))

    def test_bad_dims_rejected(self):
        with pytest.raises(SchemaError):
            init_params(0, 0, 4)


class TestForward:
    def test_constant_network(self):
        p = MlpParams(W1=np.zeros((4, 16)), b1=np.zeros(4),
                      W2=np.zeros((3, 4)), b2=np.array([1.0, -2.0, 0.5]))
        out = forward(p, np.arange(16.0))
        assert np.array_equal(out, [1.0, -2.0, 0.5])

    def test_tanh_zero_at_zero(self):
        w1 = np.zeros((1, 16))
        w1[0, 0] = 1.0
        p = MlpParams(W1=w1, b1=np.zeros(1), W2=np.array([[1.0]]), b2=np.zeros(1))
        m = np.zeros(16)
        assert forward(p, m)[0] == 0.0

    def test_scalar_tanh_value(self):
        w1 = np.zeros((1, 16))
        w1[0, 0] = 1.0
        p = MlpParams(W1=w1, b1=np.zeros(1), W2=np.array([[2.0]]), b2=np.zeros(1))
        m = np.zeros(16)
        m[0] = 0.5
        assert forward(p, m)[0] == pytest.approx(2.0 * math.tanh(0.5), rel=1e-12)
        assert forward(p, m)[0] == pytest.approx(0.924234, abs=1e-6)

    def test_non_finite_input_rejected(self):
        p = init_params(0, 4, 2)
        m = np.zeros(16)
        m[3] = float("inf")
        with pytest.raises(SchemaError):
            forward(p, m)

    def test_lipschitz_bound_on_random_probes(self):
        p = init_params(5, 32, 16)
        bound = np.linalg.norm(p.W2, 2) * np.linalg.norm(p.W1, 2)
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            lhs = np.linalg.norm(forward(p, a) - forward(p, b))
            assert lhs <= bound * np.linalg.norm(a - b) + 1e-12


class TestGradients:
    def test_grad_check_random_seed_zero(self):
        p = init_params(0, 6, 4)
        m = np.random.default_rng(0).normal(size=16)
        assert grad_check(p, m) < 1e-4

    def test_grad_check_fifty_seeds(self):
        worst = 0.0
        for seed in range(50):
            p = init_params(seed, 5, 3)
            m = np.random.default_rng(seed + 1000).normal(size=16)
            worst = max(worst, grad_check(p, m))
        assert worst < 1e-4

    def test_dead_input_columns_have_exactly_zero_gradient(self):
        p = init_params(2, 6, 4)
        m = np.zeros(16)
        m[0] = 0.5
        _, grads = loss_and_gradients(p, m)
        assert not grads["W1"][:, 1:].any()
        assert grads["W1"][:, 0].any()

    def test_loss_scale_doubles_gradients(self):
        p = init_params(4, 6, 4)
        m = np.random.default_rng(4).normal(size=16)
        _, g1 = loss_and_gradients(p, m, loss_scale=1.0)
        _, g2 = loss_and_gradients(p, m, loss_scale=2.0)
        for k in g1:
            assert np.allclose(g2[k], 2.0 * g1[k], rtol=1e-15)


class TestEmbeddings:
    def test_embedding_sensitive_to_one_extrinsic(self):
        p = init_params(0, 16, 8)
        rig_a = list(default_camera_rig("sim"))
        rig_b = list(rig_a)
        moved = rig_a[2]
        from dataclasses import replace

        shifted = Transform4(moved.T_cam_to_ego.m + np.array(
            [[0, 0, 0, 0.3], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]))
        rig_b[2] = replace(moved, T_cam_to_ego=shifted)
        ea = embed_record_cameras(p, rig_a)
        eb = embed_record_cameras(p, rig_b)
        assert np.allclose(ea[0], eb[0])
        assert not np.allclose(ea[2], eb[2])

    def test_input_is_flattened_image_to_ego_matrix(self):
        p = init_params(0, 16, 8)
        cam = default_camera_rig("sim")[0]
        direct = forward(p, image_to_ego_matrix(cam).to_flat())
        assert np.array_equal(embed_record_cameras(p, [cam])[0], direct)


class TestSerialization:
    def test_weight_file_roundtrip(self, tmp_path):
        p = init_params(9, 12, 6)
        path = tmp_path / "weights.json"
        save_params(p, path)
        q = load_params(path)
        assert np.array_equal(p.W1, q.W1) and np.array_equal(p.b2, q.b2)
        assert q.activation == "tanh"

    def test_unknown_format_version_rejected(self, tmp_path):
        p = init_params(9, 4, 2)
        path = tmp_path / "weights.json"
        save_params(p, path)
        import json

        obj = json.loads(path.read_text())
        obj["format_version"] = 99
        path.write_text(json.dumps(obj))
        with pytest.raises(SchemaError):
            load_params(path)
