"""World-state types for the planar micro-simulator and polyline helpers.

The simulator's native frame is the left-handed wheel-plane convention
(X forward, Y right, Z up = 0 on the ground), so raw episodes read as
synthetic-domain data. Positive yaw therefore veers toward +Y, i.e. to the
right; scenario builders account for the sign when laying out turns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import SchemaError
from ..geometry import Pose


class InvalidControlError(SchemaError):
    """Non-finite or out-of-range vehicle controls."""


DEFAULT_WHEELBASE = 2.7
MAX_STEER = 0.6
MAX_ACCEL = 4.0


@dataclass(frozen=True)
class EgoState:
    pose: Pose
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and self.v >= 0):
            raise SchemaError(f"ego speed must be finite and >= 0, got {self.v!r}")


@dataclass(frozen=True)
class AgentState:
    id: str
    kind: str  # "vehicle" | "pedestrian"
    pose: Pose
    v: float
    length: float
    width: float

    def __post_init__(self) -> None:
        if self.kind not in ("vehicle", "pedestrian"):
            raise SchemaError(f"unknown agent kind {self.kind!r}")
        if self.length <= 0 or self.width <= 0:
            raise SchemaError("agent footprint dimensions must be positive")
        if self.kind == "pedestrian" and (self.length > 1.0 or self.width > 1.0):
            raise SchemaError("pedestrian footprints are at most 1 m on a side")
        if not math.isfinite(self.v):
            raise SchemaError("agent speed must be finite")


@dataclass(frozen=True)
class EnvCondition:
    time: str  # "day" | "night"
    weather: str  # "sunny" | "rainy"

    def __post_init__(self) -> None:
        if self.time not in ("day", "night"):
            raise SchemaError(f"unknown time of day {self.time!r}")
        if self.weather not in ("sunny", "rainy"):
            raise SchemaError(f"unknown weather {self.weather!r}")


@dataclass(frozen=True)
class SignalSchedule:
    """Piecewise-constant signal state per intersection id."""

    phases: dict[str, tuple[tuple[float, str], ...]] = field(default_factory=dict)

    def state_at(self, intersection_id: str, t: float) -> str | None:
        sched = self.phases.get(intersection_id)
        if not sched:
            return None
        state = sched[0][1]
        for t_from, s in sched:
            if t >= t_from:
                state = s
            else:
                break
        return state

    def to_json_obj(self) -> dict:
        return {k: [[t, s] for t, s in v] for k, v in self.phases.items()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SignalSchedule":
        return cls({k: tuple((float(t), str(s)) for t, s in v) for k, v in obj.items()})


@dataclass(frozen=True)
class RoadMap:
    """Lane centerlines with a shared width, plus the ego route polyline."""

    lanes: tuple[np.ndarray, ...]
    lane_width: float
    route: np.ndarray
    intersections: tuple[tuple[float, float], ...] = ()
    signals: SignalSchedule = field(default_factory=SignalSchedule)

    def __post_init__(self) -> None:
        if self.lane_width <= 0:
            raise SchemaError("lane_width must be positive")
        if len(self.lanes) == 0:
            raise SchemaError("a road map needs at least one lane centerline")
        for lane in self.lanes:
            if lane.ndim != 2 or lane.shape[1] != 2 or lane.shape[0] < 2:
                raise SchemaError("lane centerlines must be (N>=2, 2) polylines")
        if self.route.ndim != 2 or self.route.shape[1] != 2 or self.route.shape[0] < 2:
            raise SchemaError("route must be an (N>=2, 2) polyline")

    def to_json_obj(self) -> dict:
        return {
            "lanes": [lane.tolist() for lane in self.lanes],
            "lane_width": self.lane_width,
            "route": self.route.tolist(),
            "intersections": [list(p) for p in self.intersections],
            "signals": self.signals.to_json_obj(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RoadMap":
        try:
            return cls(
                lanes=tuple(np.asarray(l, dtype=float) for l in obj["lanes"]),
                lane_width=float(obj["lane_width"]),
                route=np.asarray(obj["route"], dtype=float),
                intersections=tuple((float(x), float(y)) for x, y in obj.get("intersections", [])),
                signals=SignalSchedule.from_json_obj(obj.get("signals", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad road map description: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RoadMap":
        return cls.from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# Polyline helpers

def arc_lengths(poly: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_at(poly: np.ndarray, s: float) -> np.ndarray:
    """Point at arc length ``s``, clamped to the polyline's extent."""
    cum = arc_lengths(poly)
    s = float(np.clip(s, 0.0, cum[-1]))
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(poly) - 2)
    seg_len = cum[i + 1] - cum[i]
    frac = 0.0 if seg_len == 0 else (s - cum[i]) / seg_len
    return poly[i] + frac * (poly[i + 1] - poly[i])


def tangent_at(poly: np.ndarray, s: float) -> np.ndarray:
    cum = arc_lengths(poly)
    s = float(np.clip(s, 0.0, cum[-1]))
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(max(i, 0), len(poly) - 2)
    d = poly[i + 1] - poly[i]
    n = np.linalg.norm(d)
    if n == 0:
        return np.array([1.0, 0.0])
    return d / n


def project_to_polyline(poly: np.ndarray, p) -> tuple[float, float]:
    """Project a point onto a polyline.

    Returns ``(s, d)``: arc length of the closest point and the unsigned
    distance to it.
    """
    p = np.asarray(p, dtype=float)
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom == 0, 1.0, denom)
    t = np.clip(np.einsum("ij,ij->i", p[None, :] - a, ab) / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    dist = np.linalg.norm(closest - p[None, :], axis=1)
    i = int(np.argmin(dist))
    cum = arc_lengths(poly)
    seg_len = math.sqrt(float(denom[i])) if not np.array_equal(a[i], b[i]) else 0.0
    return float(cum[i] + t[i] * seg_len), float(dist[i])


def distance_to_polyline(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Unsigned distance from each of ``points`` (M,2) to the polyline."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom == 0, 1.0, denom)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("mij,ij->mi", ap, ab) / denom[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(closest - points[:, None, :], axis=2)
    return d.min(axis=1)


# ---------------------------------------------------------------------------
# Vehicle kinematics

def step_ego(
    s: EgoState,
    accel: float,
    steer: float,
    dt: float,
    wheelbase: float = DEFAULT_WHEELBASE,
) -> EgoState:
    """One kinematic-bicycle step.

    Position integrates with the pre-step speed and heading; speed clamps
    at zero (no reverse).
    """
    if not (math.isfinite(accel) and math.isfinite(steer)):
        raise InvalidControlError(f"non-finite controls accel={accel!r} steer={steer!r}")
    if not (0.0 < dt <= 0.5):
        raise InvalidControlError(f"dt must be in (0, 0.5], got {dt!r}")
    if abs(steer) > MAX_STEER + 1e-12:
        raise InvalidControlError(f"|steer| must be <= {MAX_STEER}, got {steer!r}")
    p = s.pose
    x = p.x + s.v * math.cos(p.yaw) * dt
    y = p.y + s.v * math.sin(p.yaw) * dt
    yaw = p.yaw + (s.v / wheelbase) * math.tan(steer) * dt
    v = max(0.0, s.v + accel * dt)
    return EgoState(pose=Pose(x, y, p.z, yaw), v=v)


# ---------------------------------------------------------------------------
# Map builders (native frame: +y is to the ego's right)

def straight_map(
    length: float = 180.0,
    lane_width: float = 4.0,
    oncoming: bool = False,
    adjacent: bool = False,
    x0: float = -30.0,
) -> RoadMap:
    ego = np.array([[x0, 0.0], [length, 0.0]])
    lanes = [ego]
    if oncoming:
        # Right-hand traffic: the opposing lane lies across the divider, -y.
        lanes.append(np.array([[length, -lane_width], [x0, -lane_width]]))
    if adjacent:
        lanes.append(np.array([[x0, -lane_width], [length, -lane_width]]))
    return RoadMap(lanes=tuple(lanes), lane_width=lane_width, route=ego)


def turn_map(
    direction: str,
    radius: float = 18.0,
    approach: float = 55.0,
    exit_len: float = 60.0,
    lane_width: float = 4.0,
    x0: float = -30.0,
) -> RoadMap:
    """Ninety-degree turn. ``direction`` is the real-world turn direction;
    a left turn curves toward -y in the native frame."""
    if direction not in ("left", "right"):
        raise SchemaError(f"turn direction must be 'left' or 'right', got {direction!r}")
    sign = -1.0 if direction == "left" else 1.0
    pts = [np.array([x0, 0.0]), np.array([approach, 0.0])]
    center = np.array([approach, sign * radius])
    n_arc = 24
    for i in range(1, n_arc + 1):
        ang = (math.pi / 2) * i / n_arc
        # Start angle points from the arc center back toward the approach lane.
        pts.append(center + radius * np.array([math.sin(ang), -sign * math.cos(ang)]))
    end = pts[-1]
    pts.append(end + np.array([0.0, sign * exit_len]))
    route = np.vstack(pts)
    return RoadMap(lanes=(route,), lane_width=lane_width, route=route)


def intersection_map(
    x_int: float = 55.0,
    lane_width: float = 4.0,
    length: float = 180.0,
    cross_half: float = 60.0,
    signal_states: dict[str, str] | None = None,
    x0: float = -30.0,
    turn: str | None = None,
) -> RoadMap:
    """Straight-through (or turning) route crossing a perpendicular lane."""
    cross = np.array([[x_int, -cross_half], [x_int, cross_half]])
    if turn is None:
        ego = np.array([[x0, 0.0], [length, 0.0]])
    else:
        sign = -1.0 if turn == "left" else 1.0
        radius = max(6.0, lane_width * 1.5)
        approach = x_int - radius
        pts = [np.array([x0, 0.0]), np.array([approach, 0.0])]
        center = np.array([approach, sign * radius])
        for i in range(1, 17):
            ang = (math.pi / 2) * i / 16
            pts.append(center + radius * np.array([math.sin(ang), -sign * math.cos(ang)]))
        pts.append(pts[-1] + np.array([0.0, sign * cross_half]))
        ego = np.vstack(pts)
    phases = {}
    if signal_states:
        phases = {k: ((0.0, v),) for k, v in signal_states.items()}
    return RoadMap(
        lanes=(ego, cross),
        lane_width=lane_width,
        route=ego,
        intersections=((x_int, 0.0),),
        signals=SignalSchedule(phases),
    )


def env_dynamics(env: EnvCondition) -> dict[str, float]:
    """Environment-dependent driving factors.

    Rain lowers grip (weaker braking) and target speed; night trims the
    target speed. Scenario triggers scale with the effective braking limit
    so hazards stay avoidable.
    """
    speed_factor = 1.0
    brake_factor = 1.0
    if env.weather == "rainy":
        speed_factor *= 0.85
        brake_factor *= 0.75
    if env.time == "night":
        speed_factor *= 0.9
    return {"speed_factor": speed_factor, "brake_factor": brake_factor}


def agent_moved(a: AgentState, dt: float, accel: float = 0.0) -> AgentState:
    """Advance an agent along its heading at its own speed."""
    p = a.pose
    x = p.x + a.v * math.cos(p.yaw) * dt
    y = p.y + a.v * math.sin(p.yaw) * dt
    v = max(0.0, a.v + accel * dt)
    return replace(a, pose=Pose(x, y, p.z, p.yaw), v=v)
