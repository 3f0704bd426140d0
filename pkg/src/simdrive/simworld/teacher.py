"""Rule-based privileged teacher: IDM car-following plus pure pursuit.

The teacher sees the full world state (agent poses, scripted velocities,
signal states). Longitudinal control is an IDM law against the nearest
in-corridor lead (real, or a virtual stopped lead at the stop line when
the ego's signal is red), overridden by a hard brake whenever the
predicted time to collision against any agent footprint drops below the
threshold. Lateral control is pure pursuit on the route polyline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..evaluation import ObbFootprint, obb_overlap
from ..geometry import normalize_angle
from .world import (
    MAX_ACCEL,
    MAX_STEER,
    AgentState,
    EgoState,
    RoadMap,
    point_at,
    project_to_polyline,
    tangent_at,
)

EGO_LENGTH = 4.0
EGO_WIDTH = 1.8


@dataclass(frozen=True)
class TeacherConfig:
    desired_speed: float = 9.0
    idm_accel: float = 2.0          # comfortable acceleration a
    idm_decel: float = 3.0          # comfortable braking b
    idm_delta: float = 4.0
    idm_jam_gap: float = 2.0        # s0
    idm_headway: float = 2.0        # desired time gap T
    ttc_threshold: float = 1.5      # hard-brake trigger, seconds
    ttc_horizon: float = 4.0
    ttc_step: float = 0.1
    hard_brake: float = 4.0         # magnitude; scenarios reduce it on wet roads
    lookahead_gain: float = 0.9     # seconds of travel
    lookahead_min: float = 4.0
    lookahead_max: float = 14.0
    wheelbase: float = 2.7
    stop_line_margin: float = 4.0


@dataclass(frozen=True)
class WorldView:
    """Privileged state handed to the teacher each control step."""

    map: RoadMap
    agents: tuple[AgentState, ...]
    t: float
    config: TeacherConfig = field(default_factory=TeacherConfig)


def pure_pursuit_steer(ego: EgoState, route: np.ndarray, cfg: TeacherConfig) -> float:
    s_ego, _ = project_to_polyline(route, ego.pose.xy())
    ld = float(np.clip(cfg.lookahead_gain * max(ego.v, 1.0), cfg.lookahead_min, cfg.lookahead_max))
    target = point_at(route, s_ego + ld)
    dx = target[0] - ego.pose.x
    dy = target[1] - ego.pose.y
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        return 0.0
    alpha = normalize_angle(math.atan2(dy, dx) - ego.pose.yaw)
    steer = math.atan2(2.0 * cfg.wheelbase * math.sin(alpha), dist)
    return float(np.clip(steer, -MAX_STEER, MAX_STEER))


def _lead_gap(ego: EgoState, world: WorldView) -> tuple[float, float] | None:
    """Nearest lead in the ego corridor: (bumper gap, lead speed along route).

    A pedestrian walking toward the route counts as a stopped lead at its
    crossing point, so the ego yields before the path is actually blocked.
    """
    route = world.map.route
    s_ego, _ = project_to_polyline(route, ego.pose.xy())
    corridor = world.map.lane_width / 2.0
    best: tuple[float, float] | None = None
    for a in world.agents:
        s_a, d_a = project_to_polyline(route, a.pose.xy())
        in_corridor = d_a <= corridor + a.width / 2.0 - 0.2
        crossing_ped = False
        if not in_corridor and a.kind == "pedestrian" and a.v > 0.0 and d_a < 6.0:
            closest = point_at(route, s_a)
            to_route = closest - a.pose.xy()
            heading = np.array([math.cos(a.pose.yaw), math.sin(a.pose.yaw)])
            crossing_ped = float(to_route @ heading) > 0.0
        if not (in_corridor or crossing_ped):
            continue
        gap = s_a - s_ego - (a.length + EGO_LENGTH) / 2.0
        if crossing_ped:
            gap -= 1.2
        if gap < -EGO_LENGTH:
            continue
        tx, ty = tangent_at(route, s_a)
        v_along = 0.0 if crossing_ped else a.v * math.cos(a.pose.yaw - math.atan2(ty, tx))
        if best is None or gap < best[0]:
            best = (max(gap, 0.05), v_along)
    for iid_idx, (ix, iy) in enumerate(world.map.intersections):
        state = world.map.signals.state_at(str(iid_idx), world.t)
        if state != "red":
            continue
        s_int, d_int = project_to_polyline(route, (ix, iy))
        if d_int > world.map.lane_width:
            continue
        gap = s_int - world.config.stop_line_margin - s_ego - EGO_LENGTH / 2.0
        if gap < -EGO_LENGTH:
            continue
        if best is None or gap < best[0]:
            best = (max(gap, 0.05), 0.0)
    return best


def idm_accel(v: float, gap_and_lead: tuple[float, float] | None, cfg: TeacherConfig,
              desired_speed: float) -> float:
    v0 = max(desired_speed, 0.1)
    free = 1.0 - (v / v0) ** cfg.idm_delta
    interaction = 0.0
    if gap_and_lead is not None:
        gap, v_lead = gap_and_lead
        dv = v - v_lead
        s_star = cfg.idm_jam_gap + max(
            0.0, v * cfg.idm_headway + v * dv / (2.0 * math.sqrt(cfg.idm_accel * cfg.idm_decel))
        )
        interaction = (s_star / gap) ** 2
    return cfg.idm_accel * (free - interaction)


def _ego_predictions(ego: EgoState, route: np.ndarray, ts: np.ndarray):
    """Two constant-speed forecasts: straight along the current heading and
    following the route polyline. Each yields (x, y, yaw) arrays."""
    cos_e, sin_e = math.cos(ego.pose.yaw), math.sin(ego.pose.yaw)
    line_x = ego.pose.x + ego.v * cos_e * ts
    line_y = ego.pose.y + ego.v * sin_e * ts
    line_yaw = np.full(len(ts), ego.pose.yaw)
    yield line_x, line_y, line_yaw

    from .world import arc_lengths

    cum = arc_lengths(route)
    s0, _ = project_to_polyline(route, ego.pose.xy())
    s_t = np.minimum(s0 + ego.v * ts, cum[-1])
    rx = np.interp(s_t, cum, route[:, 0])
    ry = np.interp(s_t, cum, route[:, 1])
    dx = np.diff(rx, append=rx[-1])
    dy = np.diff(ry, append=ry[-1])
    yaw = np.where(np.hypot(dx, dy) > 1e-9, np.arctan2(dy, dx), ego.pose.yaw)
    if len(yaw) > 1:
        yaw[-1] = yaw[-2]
    yield rx, ry, yaw


def min_ttc(ego: EgoState, world: WorldView) -> float:
    """Constant-velocity time to first footprint overlap, inf if none.

    The ego is forecast both along its heading and along the route (the
    latter catches conflicts that develop through a turn); the footprint
    is slightly inflated so the teacher keeps a buffer.
    """
    cfg = world.config
    if not world.agents:
        return math.inf
    ts = np.arange(cfg.ttc_step, cfg.ttc_horizon + 1e-9, cfg.ttc_step)
    ego_half_diag = math.hypot((EGO_LENGTH + 0.4) / 2.0, (EGO_WIDTH + 0.2) / 2.0)
    best = math.inf
    for ex, ey, eyaw in _ego_predictions(ego, world.map.route, ts):
        for a in world.agents:
            # Stretch the agent along its heading by ~0.3 s of travel so a
            # near-simultaneous crossing still reads as a conflict.
            a_len = a.length + min(0.6 * a.v, 4.0)
            ax = a.pose.x + a.v * math.cos(a.pose.yaw) * ts
            ay = a.pose.y + a.v * math.sin(a.pose.yaw) * ts
            dist = np.hypot(ax - ex, ay - ey)
            reach = ego_half_diag + math.hypot(a_len / 2.0, a.width / 2.0)
            for i in np.nonzero(dist < reach)[0]:
                t = float(ts[i])
                if t >= best:
                    break
                ego_box = ObbFootprint(float(ex[i]), float(ey[i]), float(eyaw[i]),
                                       EGO_LENGTH + 0.4, EGO_WIDTH + 0.2)
                agent_box = ObbFootprint(float(ax[i]), float(ay[i]), a.pose.yaw,
                                         a_len, a.width)
                if obb_overlap(ego_box, agent_box):
                    best = t
                    break
    return best


def teacher_plan(world: WorldView, ego: EgoState,
                 desired_speed: float | None = None,
                 brake_limit: float | None = None) -> tuple[float, float]:
    """Privileged expert controls, clamped to physical limits."""
    cfg = world.config
    v0 = desired_speed if desired_speed is not None else cfg.desired_speed
    brake = brake_limit if brake_limit is not None else cfg.hard_brake

    steer = pure_pursuit_steer(ego, world.map.route, cfg)
    accel = idm_accel(ego.v, _lead_gap(ego, world), cfg, v0)
    # The threshold grows when braking is weak (wet roads) so the stop
    # still fits inside the warning window; a coast band above it buys
    # margin in near-simultaneous crossings.
    threshold = max(cfg.ttc_threshold, ego.v / (2.0 * brake) + 0.3)
    ttc = min_ttc(ego, world)
    if ttc < threshold:
        accel = -brake
    elif ttc < threshold + 1.0:
        accel = min(accel, 0.0)
    accel = float(np.clip(accel, -MAX_ACCEL, MAX_ACCEL))
    return accel, steer
