from __future__ import annotations

import math

import numpy as np
import pytest

from simdrive.curation import EpisodeRecord
from simdrive.geometry import Pose, default_camera_rig
from simdrive.simworld.episodes import Frame
from simdrive.simworld.world import EgoState

SIM_RIG = default_camera_rig("sim")
REAL_RIG = default_camera_rig("real")


def straight_history(v: float = 9.0, dt: float = 0.5, yaw_rate: float = 0.0):
    """Five consistent history frames ending at the origin-ish pose."""
    frames = []
    for i in range(5):
        t = i * dt
        if abs(yaw_rate) < 1e-12:
            pose = Pose(v * t, 0.0, 0.0, 0.0)
        else:
            r = v / yaw_rate
            pose = Pose(r * math.sin(yaw_rate * t), r * (1.0 - math.cos(yaw_rate * t)),
                        0.0, yaw_rate * t)
        frames.append(Frame(t=t, ego=EgoState(pose=pose, v=v), agents=(), signals={}))
    return tuple(frames)


def random_history(rng, dt: float = 0.5):
    """Kinematically unconstrained frames, for algebraic feature tests."""
    frames = []
    for i in range(5):
        pose = Pose(float(rng.uniform(-20, 20)), float(rng.uniform(-20, 20)),
                    0.0, float(rng.uniform(-3, 3)))
        frames.append(Frame(t=i * dt, ego=EgoState(pose=pose, v=float(rng.uniform(0, 15))),
                            agents=(), signals={}))
    return tuple(frames)


def make_record(
    rid: str = "r0",
    provenance: str = "sim",
    city: str = "Town13",
    time: str = "day",
    weather: str = "sunny",
    maneuver: str = "straight",
    command: str = "move forward",
    convention: str = "LH_FRU_WHEEL",
    waypoints=None,
    speeds=None,
    v: float = 9.0,
    yaw_rate: float = 0.0,
    cameras=None,
    scenario: str = "E2DCommon",
    history=None,
) -> EpisodeRecord:
    if waypoints is None:
        waypoints = np.array([[v * 0.5 * k, 0.0] for k in range(1, 7)])
    if speeds is None:
        speeds = np.full(6, float(v))
    difficulty = "H2D" if (time == "night" or weather == "rainy" or maneuver == "turn") else "E2D"
    return EpisodeRecord(
        id=rid,
        provenance=provenance,
        city=city,
        env={"time": time, "weather": weather},
        maneuver=maneuver,
        scenario=scenario,
        frame_convention=convention,
        cameras=cameras if cameras is not None else SIM_RIG,
        history=history if history is not None else straight_history(v=v, yaw_rate=yaw_rate),
        command=command,
        gt_waypoints=np.asarray(waypoints, dtype=float),
        gt_speeds=np.asarray(speeds, dtype=float),
        difficulty=difficulty,
    )


@pytest.fixture(scope="session")
def sample_episode():
    from simdrive.simworld import instantiate_scenario, simulate_episode

    return simulate_episode(instantiate_scenario("JaywalkingPedestrians", 3))


@pytest.fixture(scope="session")
def e2d_episode():
    from simdrive.simworld import instantiate_scenario, simulate_episode

    return simulate_episode(instantiate_scenario("E2DCommon", 1))
