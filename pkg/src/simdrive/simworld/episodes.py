"""Episode simulation and labeling.

An episode is a time-ordered sequence of half-second frames produced by
stepping the scripted agents and the privileged teacher at a finer
internal rate. Simulation is a pure function of the scenario spec, so two
calls with the same inputs produce identical episodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SchemaError
from ..evaluation import ObbFootprint, obb_overlap
from ..geometry import Pose, normalize_angle
from .scenarios import ScenarioSpec, category_info
from .teacher import EGO_LENGTH, EGO_WIDTH, TeacherConfig, WorldView, teacher_plan
from .world import AgentState, EgoState, project_to_polyline, step_ego

ANCHOR_INDEX = 4  # frame with full 5-frame history; future waypoints follow
FUTURE_STEPS = 6
TURN_THRESHOLD_RAD = math.radians(10.0)


@dataclass(frozen=True)
class Frame:
    t: float
    ego: EgoState
    agents: tuple[AgentState, ...]
    signals: dict[str, str]


@dataclass(frozen=True)
class Episode:
    frames: tuple[Frame, ...]
    spec: ScenarioSpec
    dt: float
    valid: bool = True
    invalid_reason: str = ""

    def __post_init__(self) -> None:
        if len(self.frames) < 11:
            raise SchemaError(f"episodes need >= 11 frames, got {len(self.frames)}")
        times = [f.t for f in self.frames]
        steps = np.diff(times)
        if not np.all(steps > 0) or not np.allclose(steps, self.dt, atol=1e-9):
            raise SchemaError("frame times must increase by a constant dt")

    @property
    def id(self) -> str:
        return f"{self.spec.category}-s{self.spec.seed}"


@dataclass(frozen=True)
class EpisodeLabels:
    time: str
    weather: str
    maneuver: str  # "straight" | "turn"
    difficulty: str  # "E2D" | "H2D"


def simulate_episode(
    spec: ScenarioSpec,
    horizon_s: float = 8.0,
    dt: float = 0.5,
    substeps: int = 10,
    teacher_config: TeacherConfig | None = None,
) -> Episode:
    """Roll the scenario out under the privileged teacher.

    Frames are recorded every ``dt``; the teacher and the agent scripts run
    at ``dt / substeps`` for stable control.
    """
    if horizon_s < 5.5:
        raise SchemaError(f"horizon must be >= 5.5 s, got {horizon_s}")
    if not (0.0 < dt <= 0.5):
        raise SchemaError(f"dt must be in (0, 0.5], got {dt}")
    defn = category_info(spec.category)
    cfg = teacher_config or TeacherConfig()
    v_des = float(spec.params.get("v_des", cfg.desired_speed))
    brake = float(spec.params.get("brake", cfg.hard_brake))

    ego = EgoState(pose=Pose(0.0, 0.0, 0.0, 0.0), v=v_des)
    agents = tuple(defn.agents_init(spec))
    n_frames = int(round(horizon_s / dt)) + 1
    dt_inner = dt / substeps

    def signal_snapshot(t: float) -> dict[str, str]:
        return {k: spec.map.signals.state_at(k, t) for k in spec.map.signals.phases}

    frames = [Frame(0.0, ego, agents, signal_snapshot(0.0))]
    valid = True
    reason = ""
    t = 0.0
    for k in range(1, n_frames):
        for _ in range(substeps):
            world = WorldView(map=spec.map, agents=agents, t=t, config=cfg)
            accel, steer = teacher_plan(world, ego, desired_speed=v_des, brake_limit=brake)
            ego = step_ego(ego, accel, steer, dt_inner, wheelbase=cfg.wheelbase)
            agents = defn.step(spec, t, agents, ego, dt_inner)
            t += dt_inner
        t_frame = k * dt
        frames.append(Frame(t_frame, ego, agents, signal_snapshot(t_frame)))
        _, off_route = project_to_polyline(spec.map.route, ego.pose.xy())
        if off_route > spec.map.lane_width:
            valid = False
            reason = f"ego left the route corridor at t={t_frame:.1f}s (offset {off_route:.2f} m)"
    return Episode(frames=tuple(frames), spec=spec, dt=dt, valid=valid, invalid_reason=reason)


def ego_footprint(ego: EgoState) -> ObbFootprint:
    return ObbFootprint(ego.pose.x, ego.pose.y, ego.pose.yaw, EGO_LENGTH, EGO_WIDTH)


def episode_has_overlap(e: Episode) -> bool:
    """True if the ego footprint overlaps any agent footprint in any frame."""
    for f in e.frames:
        box = ego_footprint(f.ego)
        for a in f.agents:
            if obb_overlap(box, ObbFootprint(a.pose.x, a.pose.y, a.pose.yaw, a.length, a.width)):
                return True
    return False


def classify_episode(e: Episode, anchor_index: int = ANCHOR_INDEX) -> EpisodeLabels:
    """Label an episode by environment and by maneuver over the future
    horizon; H2D iff night, rainy, or turning."""
    if anchor_index + FUTURE_STEPS >= len(e.frames):
        raise SchemaError("episode too short to classify at this anchor")
    yaw0 = e.frames[anchor_index].ego.pose.yaw
    yaw1 = e.frames[anchor_index + FUTURE_STEPS].ego.pose.yaw
    dyaw = abs(normalize_angle(yaw1 - yaw0))
    maneuver = "turn" if dyaw > TURN_THRESHOLD_RAD else "straight"
    env = e.spec.env
    hard = env.time == "night" or env.weather == "rainy" or maneuver == "turn"
    return EpisodeLabels(time=env.time, weather=env.weather, maneuver=maneuver,
                         difficulty="H2D" if hard else "E2D")


# ---------------------------------------------------------------------------
# Serialization (used by the dataset layer)

def frame_to_json_obj(f: Frame) -> dict:
    return {
        "t": f.t,
        "ego": {"pose": _pose_obj(f.ego.pose), "v": f.ego.v},
        "agents": [
            {"id": a.id, "kind": a.kind, "pose": _pose_obj(a.pose), "v": a.v,
             "length": a.length, "width": a.width}
            for a in f.agents
        ],
        "signals": dict(f.signals),
    }


def _pose_obj(p: Pose) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z, "yaw": p.yaw}


def _pose_from_obj(obj: dict) -> Pose:
    return Pose(float(obj["x"]), float(obj["y"]), float(obj["z"]), float(obj["yaw"]))


def frame_from_json_obj(obj: dict) -> Frame:
    return Frame(
        t=float(obj["t"]),
        ego=EgoState(pose=_pose_from_obj(obj["ego"]["pose"]), v=float(obj["ego"]["v"])),
        agents=tuple(
            AgentState(id=a["id"], kind=a["kind"], pose=_pose_from_obj(a["pose"]),
                       v=float(a["v"]), length=float(a["length"]), width=float(a["width"]))
            for a in obj["agents"]
        ),
        signals={k: v for k, v in obj.get("signals", {}).items()},
    )


def episode_to_json_obj(e: Episode) -> dict:
    return {
        "id": e.id,
        "spec": e.spec.to_json_obj(),
        "dt": e.dt,
        "valid": e.valid,
        "invalid_reason": e.invalid_reason,
        "frames": [frame_to_json_obj(f) for f in e.frames],
    }


def episode_from_json_obj(obj: dict) -> Episode:
    return Episode(
        frames=tuple(frame_from_json_obj(f) for f in obj["frames"]),
        spec=ScenarioSpec.from_json_obj(obj["spec"]),
        dt=float(obj["dt"]),
        valid=bool(obj.get("valid", True)),
        invalid_reason=str(obj.get("invalid_reason", "")),
    )
