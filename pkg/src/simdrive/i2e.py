"""Deterministic two-layer MLP embedding a flattened image-to-ego matrix.

forward: e = W2 tanh(W1 m + b1) + b2, with m the row-major 16-vector of a
camera's image-to-ego transform. Backpropagation is implemented by hand
and verified against central finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .geometry import CameraCalibration, image_to_ego_matrix

INPUT_DIM = 16
WEIGHT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    W1: np.ndarray  # (d_h, 16)
    b1: np.ndarray  # (d_h,)
    W2: np.ndarray  # (d_e, d_h)
    b2: np.ndarray  # (d_e,)
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.activation != "tanh":
            raise SchemaError(f"unsupported activation {self.activation!r}")
        d_h = self.W1.shape[0]
        d_e = self.W2.shape[0]
        if self.W1.shape != (d_h, INPUT_DIM) or self.b1.shape != (d_h,):
            raise SchemaError(f"bad first-layer shapes {self.W1.shape}, {self.b1.shape}")
        if self.W2.shape != (d_e, d_h) or self.b2.shape != (d_e,):
            raise SchemaError(f"bad second-layer shapes {self.W2.shape}, {self.b2.shape}")
        if d_h <= 0 or d_e <= 0:
            raise SchemaError("hidden and embedding dimensions must be positive")
        for arr in (self.W1, self.b1, self.W2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise SchemaError("parameters must be finite")
            arr.setflags(write=False)

    @property
    def d_h(self) -> int:
        return self.W1.shape[0]

    @property
    def d_e(self) -> int:
        return self.W2.shape[0]


def init_params(seed: int, d_h: int = 64, d_e: int = 32) -> MlpParams:
    """Scaled-uniform init with bounds sqrt(6 / (fan_in + fan_out)); zero biases."""
    if d_h <= 0 or d_e <= 0:
        raise SchemaError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (INPUT_DIM + d_h))
    lim2 = math.sqrt(6.0 / (d_h + d_e))
    return MlpParams(
        W1=rng.uniform(-lim1, lim1, size=(d_h, INPUT_DIM)),
        b1=np.zeros(d_h),
        W2=rng.uniform(-lim2, lim2, size=(d_e, d_h)),
        b2=np.zeros(d_e),
    )


def forward(p: MlpParams, m16) -> np.ndarray:
    """Embed one flattened transform; returns a (d_e,) vector."""
    m = np.asarray(m16, dtype=float).reshape(-1)
    if m.shape != (INPUT_DIM,):
        raise SchemaError(f"expected a 16-vector, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SchemaError("encoder input must be finite")
    h = np.tanh(p.W1 @ m + p.b1)
    return p.W2 @ h + p.b2


def embed_camera(p: MlpParams, cam: CameraCalibration) -> np.ndarray:
    return forward(p, image_to_ego_matrix(cam).to_flat())


def embed_record_cameras(p: MlpParams, cameras) -> np.ndarray:
    """Embeddings for all views, stacked (n_views, d_e) in record order."""
    return np.stack([embed_camera(p, c) for c in cameras])


def loss_and_gradients(p: MlpParams, m16, loss_scale: float = 1.0):
    """Loss c * 0.5 ||e||^2 and its analytic parameter gradients."""
    m = np.asarray(m16, dtype=float).reshape(-1)
    z = p.W1 @ m + p.b1
    h = np.tanh(z)
    e = p.W2 @ h + p.b2
    loss = loss_scale * 0.5 * float(e @ e)
    g_e = loss_scale * e
    g_h = p.W2.T @ g_e
    g_z = g_h * (1.0 - h * h)
    return loss, {
        "W1": np.outer(g_z, m),
        "b1": g_z,
        "W2": np.outer(g_e, h),
        "b2": g_e,
    }


def grad_check(p: MlpParams, m16, step: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central differences.

    Relative error per component is |a - f| / max(|a| + |f|, 1e-8).
    """
    m = np.asarray(m16, dtype=float).reshape(-1)
    _, grads = loss_and_gradients(p, m)
    worst = 0.0
    for name in ("W1", "b1", "W2", "b2"):
        base = getattr(p, name)
        analytic = grads[name]
        it = np.nditer(base, flags=["multi_index"])
        fd = np.zeros_like(base)
        while not it.finished:
            idx = it.multi_index
            plus = base.copy()
            minus = base.copy()
            plus[idx] += step
            minus[idx] -= step
            lp, _ = loss_and_gradients(_with(p, name, plus), m)
            lm, _ = loss_and_gradients(_with(p, name, minus), m)
            fd[idx] = (lp - lm) / (2.0 * step)
            it.iternext()
        denom = np.maximum(np.abs(analytic) + np.abs(fd), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
    return worst


def _with(p: MlpParams, name: str, value: np.ndarray) -> MlpParams:
    fields = {"W1": p.W1, "b1": p.b1, "W2": p.W2, "b2": p.b2}
    fields[name] = value
    return MlpParams(**fields, activation=p.activation)


def save_params(p: MlpParams, path) -> None:
    obj = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "activation": p.activation,
        "d_h": p.d_h,
        "d_e": p.d_e,
        "W1": p.W1.tolist(),
        "b1": p.b1.tolist(),
        "W2": p.W2.tolist(),
        "b2": p.b2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)


def load_params(path) -> MlpParams:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format_version") != WEIGHT_FORMAT_VERSION:
        raise SchemaError(f"unsupported weight format {obj.get('format_version')!r}")
    return MlpParams(
        W1=np.asarray(obj["W1"], dtype=float),
        b1=np.asarray(obj["b1"], dtype=float),
        W2=np.asarray(obj["W2"], dtype=float),
        b2=np.asarray(obj["b2"], dtype=float),
        activation=obj["activation"],
    )
