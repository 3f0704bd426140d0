"""Open-loop planning metrics: L2 distance, collision rate, boundary rate.

All three metrics share the cumulative-horizon convention: the value at a
horizon is the per-timestep quantity averaged over every timestep up to
that horizon (2, 4, and 6 half-second steps for 1 s / 2 s / 3 s), and the
"avg" column is the mean of the three horizon values.

Collision and boundary violations are counted per trajectory and are
sticky: once a trajectory violates at step t it also counts at every later
step, which keeps the per-horizon columns monotone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

log = logging.getLogger(__name__)

HORIZON_STEPS = {"1s": 2, "2s": 4, "3s": 6}
DEFAULT_EGO_LENGTH = 4.0
DEFAULT_EGO_WIDTH = 1.8


@dataclass(frozen=True)
class ObbFootprint:
    """Oriented bounding box: center, heading, and body dimensions."""

    x: float
    y: float
    yaw: float
    length: float
    width: float

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise SchemaError("footprint dimensions must be positive")

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x, self.y])


def obb_overlap(a: ObbFootprint, b: ObbFootprint) -> bool:
    """Separating-axis test over the four face normals.

    True only for positive-area intersection; boxes that merely share an
    edge or corner do not count as overlapping.
    """
    ca = a.corners()
    cb = b.corners()
    axes = []
    for yaw in (a.yaw, b.yaw):
        c, s = math.cos(yaw), math.sin(yaw)
        axes.append((c, s))
        axes.append((-s, c))
    for ax, ay in axes:
        pa = ca[:, 0] * ax + ca[:, 1] * ay
        pb = cb[:, 0] * ax + cb[:, 1] * ay
        if pa.max() <= pb.min() or pb.max() <= pa.min():
            return False
    return True


def points_in_obb(points: np.ndarray, box: ObbFootprint) -> np.ndarray:
    """Boolean mask of points strictly inside the box."""
    p = np.atleast_2d(points) - np.array([box.x, box.y])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    u = p[:, 0] * c + p[:, 1] * s
    v = -p[:, 0] * s + p[:, 1] * c
    return (np.abs(u) < box.length / 2.0) & (np.abs(v) < box.width / 2.0)


# ---------------------------------------------------------------------------
# L2

def l2_metric(pred_waypoints, gt_waypoints) -> dict[str, float]:
    """Mean Euclidean error between predicted and ground-truth waypoints.

    Accepts (6, 2) arrays or objects with a ``waypoints`` attribute.
    """
    pw = np.asarray(getattr(pred_waypoints, "waypoints", pred_waypoints), dtype=float)
    gw = np.asarray(getattr(gt_waypoints, "waypoints", gt_waypoints), dtype=float)
    if pw.shape != (6, 2) or gw.shape != (6, 2):
        raise SchemaError(f"trajectories must have 6 waypoints, got {pw.shape} and {gw.shape}")
    d = np.linalg.norm(pw - gw, axis=1)
    out = {k: float(d[:n].mean()) for k, n in HORIZON_STEPS.items()}
    out["avg"] = float(np.mean([out["1s"], out["2s"], out["3s"]]))
    return out


# ---------------------------------------------------------------------------
# Evaluation contexts

@dataclass(frozen=True)
class EvalSample:
    """Everything needed to score one prediction.

    ``agent_boxes[k]`` holds the other agents' footprints at waypoint step
    k+1, already expressed in the same current-ego frame as the waypoints.
    ``anchor_*`` and ``mirror`` map that frame back into the world frame of
    the drivable grid (mirror first when the record was re-expressed in the
    opposite handedness from its source episode).
    """

    record_id: str
    gt: np.ndarray
    agent_boxes: tuple[tuple[ObbFootprint, ...], ...]
    anchor_x: float = 0.0
    anchor_y: float = 0.0
    anchor_yaw: float = 0.0
    mirror: bool = False
    ego_length: float = DEFAULT_EGO_LENGTH
    ego_width: float = DEFAULT_EGO_WIDTH

    def ego_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        if self.mirror:
            p[:, 1] = -p[:, 1]
        c, s = math.cos(self.anchor_yaw), math.sin(self.anchor_yaw)
        rot = np.array([[c, -s], [s, c]])
        return p @ rot.T + np.array([self.anchor_x, self.anchor_y])

    def heading_to_world(self, yaw: float) -> float:
        if self.mirror:
            yaw = -yaw
        return yaw + self.anchor_yaw


def waypoint_headings(waypoints: np.ndarray) -> np.ndarray:
    """Heading at each waypoint: direction to the next one.

    The last point reuses the previous heading; degenerate zero-length
    segments fall back to the latest defined heading (forward if none).
    """
    w = np.asarray(waypoints, dtype=float)
    headings = np.zeros(len(w))
    last = 0.0
    for i in range(len(w)):
        if i < len(w) - 1:
            d = w[i + 1] - w[i]
            if np.linalg.norm(d) > 1e-9:
                last = math.atan2(d[1], d[0])
        headings[i] = last
    return headings


# ---------------------------------------------------------------------------
# Counter-based rates

@dataclass
class RateCounters:
    """Per-timestep event counters behind the percentage columns."""

    n_event: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=int))
    n_total: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=int))

    def add(self, first_violation: int | None) -> None:
        self.n_total += 1
        if first_violation is not None:
            self.n_event[first_violation:] += 1

    def merge(self, other: "RateCounters") -> "RateCounters":
        return RateCounters(self.n_event + other.n_event, self.n_total + other.n_total)

    def percentages(self) -> dict[str, float]:
        with np.errstate(invalid="ignore", divide="ignore"):
            per_step = np.where(self.n_total > 0, 100.0 * self.n_event / np.maximum(self.n_total, 1), 0.0)
        out = {k: float(per_step[:n].mean()) for k, n in HORIZON_STEPS.items()}
        out["avg"] = float(np.mean([out["1s"], out["2s"], out["3s"]]))
        return out


def _check_ids(preds: dict, samples: dict) -> list[str]:
    if set(preds) != set(samples):
        missing = set(preds) ^ set(samples)
        raise SchemaError(f"prediction/sample id mismatch: {sorted(missing)[:5]}")
    return sorted(preds)


def collision_first_step(waypoints: np.ndarray, sample: EvalSample) -> int | None:
    """Index (0-based) of the first waypoint whose ego footprint overlaps
    any agent footprint, or None."""
    w = np.asarray(waypoints, dtype=float)
    headings = waypoint_headings(w)
    for k in range(6):
        ego_box = ObbFootprint(w[k, 0], w[k, 1], float(headings[k]),
                               sample.ego_length, sample.ego_width)
        for agent in sample.agent_boxes[k]:
            if obb_overlap(ego_box, agent):
                return k
    return None


def collision_rate(
    preds: dict[str, np.ndarray], samples: dict[str, EvalSample]
) -> tuple[dict[str, float], RateCounters]:
    """Percentage of trajectories in collision, per horizon, with counters."""
    counters = RateCounters()
    for rid in _check_ids(preds, samples):
        w = np.asarray(getattr(preds[rid], "waypoints", preds[rid]), dtype=float)
        counters.add(collision_first_step(w, samples[rid]))
    return counters.percentages(), counters


def footprint_sample_points(box: ObbFootprint, spacing: float) -> np.ndarray:
    """Grid of points covering the box interior, corners and edges included."""
    nu = max(2, int(math.ceil(box.length / spacing)) + 1)
    nv = max(2, int(math.ceil(box.width / spacing)) + 1)
    u = np.linspace(-box.length / 2.0, box.length / 2.0, nu)
    v = np.linspace(-box.width / 2.0, box.width / 2.0, nv)
    uu, vv = np.meshgrid(u, v)
    pts = np.stack([uu.ravel(), vv.ravel()], axis=1)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.array([box.x, box.y])


def boundary_first_step(waypoints: np.ndarray, sample: EvalSample, grid) -> int | None:
    """First waypoint whose footprint leaves the drivable raster, or None.

    Points outside the grid extent count as violations.
    """
    w = np.asarray(waypoints, dtype=float)
    headings = waypoint_headings(w)
    for k in range(6):
        world_xy = sample.ego_to_world(w[k])
        box = ObbFootprint(float(world_xy[0, 0]), float(world_xy[0, 1]),
                           sample.heading_to_world(float(headings[k])),
                           sample.ego_length, sample.ego_width)
        pts = footprint_sample_points(box, grid.resolution)
        ok = grid.drivable_at(pts)
        if not bool(np.all(ok)):
            if not grid.contains(pts).all():
                log.warning("prediction %s leaves the grid extent at step %d", sample.record_id, k + 1)
            return k
    return None


def boundary_rate(
    preds: dict[str, np.ndarray],
    samples: dict[str, EvalSample],
    grids: dict[str, object],
) -> tuple[dict[str, float], RateCounters]:
    """Percentage of trajectories leaving the drivable area, per horizon."""
    counters = RateCounters()
    for rid in _check_ids(preds, samples):
        if rid not in grids:
            raise SchemaError(f"no drivable grid for record {rid}")
        w = np.asarray(getattr(preds[rid], "waypoints", preds[rid]), dtype=float)
        counters.add(boundary_first_step(w, samples[rid], grids[rid]))
    return counters.percentages(), counters


# ---------------------------------------------------------------------------
# Aggregated report structure

@dataclass
class SliceMetrics:
    n: int
    l2: dict[str, float]
    collision_pct: dict[str, float]
    boundary_pct: dict[str, float]
    collision_counters: RateCounters
    boundary_counters: RateCounters

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "l2": self.l2,
            "collision_pct": self.collision_pct,
            "boundary_pct": self.boundary_pct,
            "counters": {
                "n_collision_t": self.collision_counters.n_event.tolist(),
                "n_violation_t": self.boundary_counters.n_event.tolist(),
                "n_total_t": self.collision_counters.n_total.tolist(),
            },
        }


@dataclass
class MetricsReport:
    """Per-slice metric entries for one evaluated method."""

    method: str
    slices: dict[str, SliceMetrics]

    def to_json_obj(self) -> dict:
        return {"method": self.method,
                "slices": {k: v.to_json_obj() for k, v in sorted(self.slices.items())}}


def evaluate_method(
    method: str,
    preds: dict[str, np.ndarray],
    samples: dict[str, EvalSample],
    grids: dict[str, object] | None,
    slice_assignments: dict[str, list[str]],
) -> MetricsReport:
    """Score one method on every slice.

    ``slice_assignments`` maps slice name to the record ids it contains;
    pass ``grids=None`` to skip the boundary metric.
    """
    slices: dict[str, SliceMetrics] = {}
    for slice_name, ids in slice_assignments.items():
        ids = [i for i in ids if i in preds]
        if not ids:
            continue
        l2_values = {k: [] for k in ("1s", "2s", "3s", "avg")}
        for rid in ids:
            w = np.asarray(getattr(preds[rid], "waypoints", preds[rid]), dtype=float)
            m = l2_metric(w, samples[rid].gt)
            for k in l2_values:
                l2_values[k].append(m[k])
        sub_preds = {i: preds[i] for i in ids}
        sub_samples = {i: samples[i] for i in ids}
        col_pct, col_ctr = collision_rate(sub_preds, sub_samples)
        if grids is not None:
            sub_grids = {i: grids[i] for i in ids}
            bnd_pct, bnd_ctr = boundary_rate(sub_preds, sub_samples, sub_grids)
        else:
            bnd_pct, bnd_ctr = {k: 0.0 for k in ("1s", "2s", "3s", "avg")}, RateCounters()
            bnd_ctr.n_total += len(ids)
        slices[slice_name] = SliceMetrics(
            n=len(ids),
            l2={k: float(np.mean(v)) for k, v in l2_values.items()},
            collision_pct=col_pct,
            boundary_pct=bnd_pct,
            collision_counters=col_ctr,
            boundary_counters=bnd_ctr,
        )
    return MetricsReport(method=method, slices=slices)
