"""Baseline and learned planners emitting 6-waypoint trajectories + speeds.

The learned planner is a closed-form ridge regressor over hand-built
record features (relative history, command one-hot, provenance flag, mean
geometry-encoder embedding). It deliberately has no capacity knobs: any
performance difference between training mixes reflects the data, not the
model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curation import EpisodeRecord
from .errors import SchemaError
from .geometry import normalize_angle
from .i2e import MlpParams, embed_record_cameras, init_params

COMMANDS = ("move forward", "turn left", "turn right")
N_TARGETS = 18  # 6 waypoints x 2 + 6 speeds
HORIZON_LABELS = {"1s": (0, 2), "2s": (0, 4), "3s": (0, 6)}


@dataclass(frozen=True)
class Trajectory:
    waypoints: np.ndarray  # (6, 2) current-ego frame
    speeds: np.ndarray  # (6,)

    def __post_init__(self) -> None:
        wp = np.asarray(self.waypoints, dtype=float)
        sp = np.asarray(self.speeds, dtype=float)
        if wp.shape != (6, 2) or sp.shape != (6,):
            raise SchemaError(f"bad trajectory shapes {wp.shape}, {sp.shape}")
        if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(sp))):
            raise SchemaError("trajectory values must be finite")
        wp.setflags(write=False)
        sp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "speeds", sp)


def gt_trajectory(r: EpisodeRecord) -> Trajectory:
    return Trajectory(waypoints=np.asarray(r.gt_waypoints), speeds=np.asarray(r.gt_speeds))


# ---------------------------------------------------------------------------
# Kinematic baselines

def _yaw_rate(r: EpisodeRecord) -> float:
    h = r.history
    dt = h[-1].t - h[-2].t
    if dt <= 0:
        raise SchemaError("history frames must be increasing in time")
    return normalize_angle(h[-1].ego.pose.yaw - h[-2].ego.pose.yaw) / dt


def kinematic_baseline(r: EpisodeRecord, mode: str = "constant_velocity",
                       dt: float = 0.5) -> Trajectory:
    """Extrapolate the last history state.

    ``constant_velocity`` holds speed and heading; ``constant_turn_rate``
    additionally holds the yaw rate estimated from the last two history
    frames, which traces a circular arc of radius v / omega.
    """
    v = r.history[-1].ego.v
    if mode == "constant_velocity":
        omega = 0.0
    elif mode == "constant_turn_rate":
        omega = _yaw_rate(r)
    else:
        raise SchemaError(f"unknown baseline mode {mode!r}")
    waypoints = np.zeros((6, 2))
    for k in range(1, 7):
        t = k * dt
        if abs(omega) < 1e-9:
            waypoints[k - 1] = (v * t, 0.0)
        else:
            waypoints[k - 1] = ((v / omega) * math.sin(omega * t),
                                (v / omega) * (1.0 - math.cos(omega * t)))
    return Trajectory(waypoints=waypoints, speeds=np.full(6, v))


# ---------------------------------------------------------------------------
# Features

@dataclass(frozen=True)
class FeatureSpec:
    include_history: bool = True
    include_command: bool = True
    include_provenance: bool = True
    include_i2e: bool = True
    i2e_seed: int = 0
    i2e_d_h: int = 16
    i2e_d_e: int = 8

    @property
    def dim(self) -> int:
        d = 1  # bias
        if self.include_history:
            d += 20  # 5 x (dx, dy, dyaw) + 5 speeds
        if self.include_command:
            d += len(COMMANDS)
        if self.include_provenance:
            d += 1
        if self.include_i2e:
            d += self.i2e_d_e
        return d

    def to_json_obj(self) -> dict:
        return {
            "include_history": self.include_history,
            "include_command": self.include_command,
            "include_provenance": self.include_provenance,
            "include_i2e": self.include_i2e,
            "i2e_seed": self.i2e_seed,
            "i2e_d_h": self.i2e_d_h,
            "i2e_d_e": self.i2e_d_e,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FeatureSpec":
        return cls(**obj)


def record_features(r: EpisodeRecord, spec: FeatureSpec, mlp: MlpParams | None) -> np.ndarray:
    """Assemble the feature vector in the declared block order."""
    parts = [np.array([1.0])]
    if spec.include_history:
        anchor = r.history[-1].ego.pose
        cos_a, sin_a = math.cos(anchor.yaw), math.sin(anchor.yaw)
        rel = []
        for f in r.history:
            dx = f.ego.pose.x - anchor.x
            dy = f.ego.pose.y - anchor.y
            rel.extend((cos_a * dx + sin_a * dy,
                        -sin_a * dx + cos_a * dy,
                        normalize_angle(f.ego.pose.yaw - anchor.yaw)))
        speeds = [f.ego.v for f in r.history]
        parts.append(np.array(rel + speeds))
    if spec.include_command:
        onehot = np.zeros(len(COMMANDS))
        if r.command in COMMANDS:
            onehot[COMMANDS.index(r.command)] = 1.0
        parts.append(onehot)
    if spec.include_provenance:
        parts.append(np.array([1.0 if r.provenance == "sim" else 0.0]))
    if spec.include_i2e:
        if mlp is None:
            raise SchemaError("feature spec includes the geometry embedding but no MLP was given")
        parts.append(embed_record_cameras(mlp, r.cameras).mean(axis=0))
    return np.concatenate(parts)


def record_targets(r: EpisodeRecord) -> np.ndarray:
    return np.concatenate([np.asarray(r.gt_waypoints).reshape(-1), np.asarray(r.gt_speeds)])


# ---------------------------------------------------------------------------
# Ridge planner

@dataclass(frozen=True)
class LinearPlanner:
    W: np.ndarray  # (d_f, 18)
    ridge_lambda: float
    feature_spec: FeatureSpec
    mlp: MlpParams | None = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if self.W.shape != (self.feature_spec.dim, N_TARGETS):
            raise SchemaError(f"weight shape {self.W.shape} does not match feature dim "
                              f"{self.feature_spec.dim}")
        self.W.setflags(write=False)


def fit_linear_planner(
    train: list[EpisodeRecord],
    ridge_lambda: float = 1e-3,
    feature_spec: FeatureSpec = FeatureSpec(),
) -> LinearPlanner:
    """Solve the ridge normal equations on mean-normalized moments.

    Normalizing by the training count makes the solution invariant to
    duplicating the training set. Records are processed in id order so the
    fit depends only on the multiset of inputs.
    """
    d_f = feature_spec.dim
    if len(train) < d_f:
        raise SchemaError(f"need at least {d_f} records to fit {d_f} features, got {len(train)}")
    mlp = init_params(feature_spec.i2e_seed, feature_spec.i2e_d_h, feature_spec.i2e_d_e) \
        if feature_spec.include_i2e else None
    ordered = sorted(train, key=lambda r: r.id)
    X = np.stack([record_features(r, feature_spec, mlp) for r in ordered])
    Y = np.stack([record_targets(r) for r in ordered])
    n = len(ordered)
    gram = X.T @ X / n + ridge_lambda * np.eye(d_f)
    moment = X.T @ Y / n
    try:
        W = np.linalg.solve(gram, moment)
    except np.linalg.LinAlgError:
        raise SchemaError("normal equations are rank-deficient; use ridge_lambda > 0") from None
    return LinearPlanner(W=W, ridge_lambda=ridge_lambda, feature_spec=feature_spec, mlp=mlp)


def predict(p: LinearPlanner, r: EpisodeRecord) -> Trajectory:
    if r.frame_convention != "RH_FLU_ROOF":
        raise SchemaError(
            f"record {r.id} is in {r.frame_convention}; align it to RH_FLU_ROOF before predicting")
    phi = record_features(r, p.feature_spec, p.mlp)
    out = phi @ p.W
    return Trajectory(waypoints=out[:12].reshape(6, 2), speeds=out[12:])


def save_planner(p: LinearPlanner, path) -> None:
    obj = {
        "format_version": 1,
        "ridge_lambda": p.ridge_lambda,
        "feature_spec": p.feature_spec.to_json_obj(),
        "W": p.W.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)


def load_planner(path) -> LinearPlanner:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    spec = FeatureSpec.from_json_obj(obj["feature_spec"])
    mlp = init_params(spec.i2e_seed, spec.i2e_d_h, spec.i2e_d_e) if spec.include_i2e else None
    return LinearPlanner(W=np.asarray(obj["W"], dtype=float),
                         ridge_lambda=float(obj["ridge_lambda"]),
                         feature_spec=spec, mlp=mlp)
