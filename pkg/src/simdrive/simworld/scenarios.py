"""Scenario registry: long-tail scripts plus the common-driving families.

Thirteen long-tail categories cover rare, high-risk events; nine carry
standard names and four are registry fillers tagged ``invented`` so
reports can exclude them. Two pseudo-categories (``E2DCommon``,
``H2DEnvironmental``) generate the routine easy / hard driving mix.

Every category owns a parameter sampler, an agent script (a pure function
stepped by the simulator), and a hazard predicate used to verify that the
scripted event actually occurs in a generated episode. Hazard triggers are
placed relative to the ego's braking capability under the drawn
environment, so the privileged teacher can always avoid the event while
still being forced to react.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import RegistryError, SchemaError
from ..geometry import Pose
from .world import (
    AgentState,
    EnvCondition,
    RoadMap,
    agent_moved,
    distance_to_polyline,
    env_dynamics,
    intersection_map,
    point_at,
    project_to_polyline,
    straight_map,
    tangent_at,
    turn_map,
)

# Marginals of the balanced synthetic mix, used when drawing environments.
P_DAY = 0.5865
P_SUNNY = 0.4838
P_TURN = 0.5358

VEHICLE_L, VEHICLE_W = 4.4, 1.9
PED_L = PED_W = 0.6


@dataclass(frozen=True)
class ScenarioSpec:
    """Deterministic description of one scenario instance."""

    category: str
    params: dict[str, float]
    env: EnvCondition
    map: RoadMap
    seed: int

    def to_json_obj(self) -> dict:
        return {
            "category": self.category,
            "params": {k: float(v) for k, v in sorted(self.params.items())},
            "env": {"time": self.env.time, "weather": self.env.weather},
            "map": self.map.to_json_obj(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ScenarioSpec":
        return cls(
            category=obj["category"],
            params={k: float(v) for k, v in obj["params"].items()},
            env=EnvCondition(**obj["env"]),
            map=RoadMap.from_json_obj(obj["map"]),
            seed=int(obj["seed"]),
        )


@dataclass(frozen=True)
class CategoryDef:
    name: str
    long_tail: bool
    invented: bool
    sample: Callable
    agents_init: Callable
    step: Callable
    hazard: Callable | None = None


def _stop_distance(v: float, brake: float) -> float:
    return v * v / (2.0 * brake)


def _base_speeds(rng: np.random.Generator, env: EnvCondition) -> dict:
    dyn = env_dynamics(env)
    return {
        "v_des": float(rng.uniform(7.5, 9.5)) * dyn["speed_factor"],
        "brake": 4.0 * dyn["brake_factor"],
    }


def _in_lane_band(y: float, lane_width: float) -> bool:
    return abs(y) < lane_width / 2.0


# ---------------------------------------------------------------------------
# Static-obstacle categories

def _sample_parking(rng, env, base):
    params = dict(base)
    params["block_x"] = float(rng.uniform(38.0, 50.0))
    params["block_y"] = float(rng.uniform(-0.4, 0.4))
    return params, straight_map()


def _init_parking(spec):
    p = spec.params
    return (AgentState("blocker", "vehicle", Pose(p["block_x"], p["block_y"], 0.0, 0.0),
                       0.0, VEHICLE_L, VEHICLE_W),)


def _step_static(spec, t, agents, ego, dt):
    return agents


def _hazard_parking(episode) -> bool:
    lw = episode.spec.map.lane_width
    x_spawn = episode.frames[0].ego.pose.x
    return any(
        a.kind == "vehicle" and a.v == 0.0 and _in_lane_band(a.pose.y, lw) and a.pose.x > x_spawn
        for f in episode.frames
        for a in f.agents
    )


def _sample_roadwork(rng, env, base):
    params = dict(base)
    params["work_x"] = float(rng.uniform(40.0, 52.0))
    params["work_y"] = float(rng.uniform(0.9, 1.3))
    params["n_obstacles"] = float(rng.integers(2, 4))
    return params, straight_map()


def _init_roadwork(spec):
    p = spec.params
    return tuple(
        AgentState(f"work{k}", "vehicle",
                   Pose(p["work_x"] + 3.0 * k, p["work_y"], 0.0, 0.0), 0.0, 1.4, 1.4)
        for k in range(int(p["n_obstacles"]))
    )


def _hazard_roadwork(episode) -> bool:
    lw = episode.spec.map.lane_width
    f0 = episode.frames[0]
    return any(a.v == 0.0 and abs(a.pose.y) - a.width / 2.0 < lw / 2.0 for a in f0.agents)


# ---------------------------------------------------------------------------
# Pedestrian categories

def _sample_jaywalk(rng, env, base):
    params = dict(base)
    params["cross_x"] = float(rng.uniform(38.0, 50.0))
    params["side"] = float(rng.choice([-1.0, 1.0]))
    params["v_ped"] = float(rng.uniform(1.0, 1.6))
    params["trigger"] = _stop_distance(params["v_des"], params["brake"]) + float(rng.uniform(10.0, 16.0))
    return params, straight_map()


def _ped_start_y(p: dict, lane_width: float, clearance: float = 1.5) -> float:
    return p["side"] * (lane_width / 2.0 + clearance)


def _init_jaywalk(spec):
    p = spec.params
    y0 = _ped_start_y(p, spec.map.lane_width)
    return (AgentState("ped", "pedestrian",
                       Pose(p["cross_x"], y0, 0.0, -p["side"] * math.pi / 2.0),
                       0.0, PED_L, PED_W),)


def _step_crossing_ped(spec, t, agents, ego, dt):
    """Pedestrian waits roadside, crosses once the ego is within the
    trigger distance, and stops on the far side."""
    p = spec.params
    lw = spec.map.lane_width
    goal_y = -p["side"] * (lw / 2.0 + 2.0)
    out = []
    for a in agents:
        if a.kind != "pedestrian":
            out.append(a)
            continue
        crossed = (a.pose.y - goal_y) * p["side"] <= 0.0
        if crossed:
            out.append(replace(a, v=0.0))
        elif a.v > 0.0:
            out.append(agent_moved(a, dt))
        else:
            ahead = p["cross_x"] - ego.pose.x
            if 0.0 < ahead < p["trigger"]:
                a = replace(a, v=p["v_ped"])
            out.append(a)
    return tuple(out)


def _hazard_ped_in_lane(episode) -> bool:
    lw = episode.spec.map.lane_width
    route = episode.spec.map.route
    for f in episode.frames:
        for a in f.agents:
            if a.kind != "pedestrian":
                continue
            d = float(distance_to_polyline(np.array([[a.pose.x, a.pose.y]]), route)[0])
            if d < lw / 2.0:
                return True
    return False


def _sample_occluded(rng, env, base):
    params = dict(base)
    params["cross_x"] = float(rng.uniform(38.0, 50.0))
    params["side"] = 1.0  # emerges from behind the parked van on the shoulder
    params["v_ped"] = float(rng.uniform(1.1, 1.6))
    params["trigger"] = _stop_distance(params["v_des"], params["brake"]) + float(rng.uniform(8.0, 12.0))
    return params, straight_map()


def _init_occluded(spec):
    p = spec.params
    lw = spec.map.lane_width
    van = AgentState("van", "vehicle",
                     Pose(p["cross_x"] - 3.0, lw / 2.0 + 1.2, 0.0, 0.0),
                     0.0, VEHICLE_L, VEHICLE_W)
    ped = AgentState("ped", "pedestrian",
                     Pose(p["cross_x"], _ped_start_y(p, lw, clearance=1.8), 0.0, -math.pi / 2.0),
                     0.0, PED_L, PED_W)
    return (van, ped)


def _sample_ped_on_turn(rng, env, base):
    params = dict(base)
    params["v_des"] = base["v_des"] * 0.7
    params["direction"] = float(rng.choice([-1.0, 1.0]))  # -1 left, +1 right
    params["radius"] = float(rng.uniform(14.0, 20.0))
    params["approach"] = float(rng.uniform(12.0, 18.0))
    params["v_ped"] = float(rng.uniform(1.0, 1.5))
    m = turn_map("left" if params["direction"] < 0 else "right",
                 radius=params["radius"], approach=params["approach"])
    # Arc lengths are measured from the route start, not the ego spawn.
    s_spawn, _ = project_to_polyline(m.route, np.array([0.0, 0.0]))
    params["s_trigger"] = s_spawn + max(4.0, params["approach"] - 6.0)
    # The pedestrian stands off the outer edge past the arc midpoint and
    # crosses perpendicular to the route.
    s_ped = s_spawn + params["approach"] + params["radius"] * math.pi / 4.0 + 4.0
    pt = point_at(m.route, s_ped)
    tv = tangent_at(m.route, s_ped)
    normal = np.array([-tv[1], tv[0]])
    outer = 1.0 if params["direction"] < 0 else -1.0
    start = pt + outer * normal * (m.lane_width / 2.0 + 1.2)
    params["ped_x0"] = float(start[0])
    params["ped_y0"] = float(start[1])
    params["ped_yaw"] = float(math.atan2(-outer * normal[1], -outer * normal[0]))
    return params, m


def _init_ped_on_turn(spec):
    p = spec.params
    return (AgentState("ped", "pedestrian",
                       Pose(p["ped_x0"], p["ped_y0"], 0.0, p["ped_yaw"]),
                       0.0, PED_L, PED_W),)


def _step_ped_on_turn(spec, t, agents, ego, dt):
    p = spec.params
    lw = spec.map.lane_width
    walk_span = lw + 3.0
    s_ego, _ = project_to_polyline(spec.map.route, ego.pose.xy())
    out = []
    for a in agents:
        if a.kind != "pedestrian":
            out.append(a)
            continue
        walked = math.hypot(a.pose.x - p["ped_x0"], a.pose.y - p["ped_y0"])
        if walked >= walk_span:
            out.append(replace(a, v=0.0))
        elif a.v > 0.0:
            out.append(agent_moved(a, dt))
        elif s_ego > p["s_trigger"]:
            out.append(replace(a, v=p["v_ped"]))
        else:
            out.append(a)
    return tuple(out)


# ---------------------------------------------------------------------------
# Oncoming-traffic categories

def _sample_invasion(rng, env, base):
    params = dict(base)
    params["x0"] = float(rng.uniform(85.0, 110.0))
    params["v_inv"] = float(rng.uniform(5.0, 8.0))
    params["gap_trigger"] = float(rng.uniform(55.0, 65.0))
    params["gap_return"] = float(rng.uniform(22.0, 28.0))
    params["invade_y"] = float(rng.uniform(-1.4, -1.0))
    return params, straight_map(oncoming=True)


def _init_invasion(spec):
    p = spec.params
    lw = spec.map.lane_width
    return (AgentState("invader", "vehicle", Pose(p["x0"], -lw, 0.0, math.pi),
                       p["v_inv"], VEHICLE_L, VEHICLE_W),)


def _step_invasion(spec, t, agents, ego, dt):
    p = spec.params
    lw = spec.map.lane_width
    out = []
    for a in agents:
        if a.id != "invader":
            out.append(a)
            continue
        a = agent_moved(a, dt)
        gap = a.pose.x - ego.pose.x
        y = a.pose.y
        if gap > p["gap_return"]:
            if gap < p["gap_trigger"] and y < p["invade_y"]:
                y = min(y + 2.2 * dt, p["invade_y"])
        else:
            y = max(y - 1.8 * dt, -lw)
        out.append(replace(a, pose=Pose(a.pose.x, y, a.pose.z, a.pose.yaw)))
    return tuple(out)


def _hazard_invasion(episode) -> bool:
    lw = episode.spec.map.lane_width
    return any(a.id == "invader" and a.pose.y > -lw / 2.0
               for f in episode.frames for a in f.agents)


def _sample_encroach(rng, env, base):
    params = dict(base)
    params["x0"] = float(rng.uniform(80.0, 110.0))
    params["v_enc"] = float(rng.uniform(5.0, 8.0))
    params["depth"] = float(rng.uniform(0.3, 0.6))
    return params, straight_map(oncoming=True)


def _init_encroach(spec):
    p = spec.params
    lw = spec.map.lane_width
    y = -(lw / 2.0) - VEHICLE_W / 2.0 + p["depth"]
    return (AgentState("encroacher", "vehicle", Pose(p["x0"], y, 0.0, math.pi),
                       p["v_enc"], VEHICLE_L, VEHICLE_W),)


def _step_forward_agents(spec, t, agents, ego, dt):
    return tuple(agent_moved(a, dt) if a.v > 0 else a for a in agents)


def _hazard_encroach(episode) -> bool:
    lw = episode.spec.map.lane_width
    return any(a.id == "encroacher" and a.pose.y + a.width / 2.0 > -lw / 2.0
               for f in episode.frames for a in f.agents)


# ---------------------------------------------------------------------------
# Merging / lead-vehicle categories

def _sample_activation(rng, env, base):
    params = dict(base)
    params["park_x"] = float(rng.uniform(40.0, 52.0))
    params["trigger"] = _stop_distance(params["v_des"], params["brake"]) + float(rng.uniform(10.0, 15.0))
    params["pull_speed"] = params["v_des"] * float(rng.uniform(0.55, 0.7))
    return params, straight_map()


def _init_activation(spec):
    p = spec.params
    lw = spec.map.lane_width
    return (AgentState("parked", "vehicle",
                       Pose(p["park_x"], lw / 2.0 + 1.1, 0.0, 0.0), 0.0, VEHICLE_L, VEHICLE_W),)


def _step_activation(spec, t, agents, ego, dt):
    p = spec.params
    out = []
    for a in agents:
        if a.id != "parked":
            out.append(a)
            continue
        active = a.v > 0.0
        if not active:
            ahead = a.pose.x - ego.pose.x
            active = 0.0 < ahead < p["trigger"]
        if active:
            v = min(a.v + 1.6 * dt, p["pull_speed"])
            x = a.pose.x + a.v * dt
            y = max(a.pose.y - 0.9 * dt, 0.0)
            out.append(replace(a, pose=Pose(x, y, a.pose.z, a.pose.yaw), v=v))
        else:
            out.append(a)
    return tuple(out)


def _hazard_activation(episode) -> bool:
    lw = episode.spec.map.lane_width
    started_parked = any(a.id == "parked" and a.v == 0.0 for a in episode.frames[0].agents)
    entered = any(a.id == "parked" and a.v > 0.5 and _in_lane_band(a.pose.y, lw)
                  for f in episode.frames for a in f.agents)
    return started_parked and entered


def _sample_cut_in(rng, env, base):
    params = dict(base)
    params["gap0"] = float(rng.uniform(9.0, 13.0))
    params["v_factor"] = float(rng.uniform(0.7, 0.85))
    params["trigger_gap"] = float(rng.uniform(7.0, 9.0))
    return params, straight_map(adjacent=True)


def _init_cut_in(spec):
    p = spec.params
    lw = spec.map.lane_width
    return (AgentState("cutter", "vehicle",
                       Pose(p["gap0"], -lw, 0.0, 0.0),
                       p["v_des"] * p["v_factor"], VEHICLE_L, VEHICLE_W),)


def _step_cut_in(spec, t, agents, ego, dt):
    p = spec.params
    lw = spec.map.lane_width
    out = []
    for a in agents:
        if a.id != "cutter":
            out.append(a)
            continue
        a = agent_moved(a, dt)
        gap = a.pose.x - ego.pose.x
        merging = a.pose.y > -lw + 0.05
        if merging or (0.0 < gap < p["trigger_gap"]):
            y = min(a.pose.y + 1.7 * dt, 0.0)
            a = replace(a, pose=Pose(a.pose.x, y, a.pose.z, a.pose.yaw))
        out.append(a)
    return tuple(out)


def _hazard_cut_in(episode) -> bool:
    lw = episode.spec.map.lane_width
    began_outside = any(a.id == "cutter" and not _in_lane_band(a.pose.y, lw)
                        for a in episode.frames[0].agents)
    crossed = any(a.id == "cutter" and _in_lane_band(a.pose.y, lw) and a.pose.x > f.ego.pose.x
                  for f in episode.frames for a in f.agents)
    return began_outside and crossed


def _sample_lead_brake(rng, env, base):
    params = dict(base)
    params["gap0"] = float(rng.uniform(22.0, 30.0))
    params["t_trigger"] = float(rng.uniform(1.0, 2.0))
    params["decel"] = float(rng.uniform(4.5, 5.5))
    return params, straight_map()


def _init_lead_brake(spec):
    p = spec.params
    return (AgentState("lead", "vehicle", Pose(p["gap0"], 0.0, 0.0, 0.0),
                       p["v_des"], VEHICLE_L, VEHICLE_W),)


def _step_lead_brake(spec, t, agents, ego, dt):
    p = spec.params
    out = []
    for a in agents:
        if a.id != "lead":
            out.append(a)
            continue
        accel = -p["decel"] if t >= p["t_trigger"] else 0.0
        out.append(agent_moved(a, dt, accel=accel))
    return tuple(out)


def _hazard_lead_brake(episode) -> bool:
    dt = episode.dt
    prev = None
    for f in episode.frames:
        lead = next((a for a in f.agents if a.id == "lead"), None)
        if lead is None:
            return False
        if prev is not None and (lead.v - prev) / dt <= -4.0:
            return True
        prev = lead.v
    return False


# ---------------------------------------------------------------------------
# Intersection categories

def _sample_red_runner(rng, env, base):
    params = dict(base)
    params["x_int"] = float(rng.uniform(32.0, 42.0))
    params["side"] = float(rng.choice([-1.0, 1.0]))
    params["v_run"] = float(rng.uniform(6.0, 9.0))
    t_conflict = params["x_int"] / params["v_des"]
    params["start_d"] = params["v_run"] * (t_conflict + float(rng.uniform(-0.2, 0.4)))
    m = intersection_map(x_int=params["x_int"],
                         signal_states={"0": "green", "0:cross": "red"})
    return params, m


def _init_red_runner(spec):
    p = spec.params
    y0 = p["side"] * p["start_d"]
    yaw = math.pi / 2.0 if p["side"] < 0 else -math.pi / 2.0
    return (AgentState("runner", "vehicle", Pose(p["x_int"], y0, 0.0, yaw),
                       p["v_run"], VEHICLE_L, VEHICLE_W),)


def _hazard_red_runner(episode) -> bool:
    p = episode.spec.params
    for f in episode.frames:
        state = episode.spec.map.signals.state_at("0:cross", f.t)
        for a in f.agents:
            if a.id == "runner" and abs(a.pose.x - p["x_int"]) < 3.0 and abs(a.pose.y) < 3.0:
                if state == "red":
                    return True
    return False


def _sample_near_collision(rng, env, base):
    params = dict(base)
    params["x_int"] = float(rng.uniform(32.0, 42.0))
    params["side"] = float(rng.choice([-1.0, 1.0]))
    params["v_cross"] = float(rng.uniform(6.0, 9.0))
    t_conflict = params["x_int"] / params["v_des"]
    params["start_d"] = params["v_cross"] * (t_conflict - float(rng.uniform(0.25, 0.45)))
    return params, intersection_map(x_int=params["x_int"])


def _init_near_collision(spec):
    p = spec.params
    y0 = p["side"] * p["start_d"]
    yaw = math.pi / 2.0 if p["side"] < 0 else -math.pi / 2.0
    return (AgentState("crosser", "vehicle", Pose(p["x_int"], y0, 0.0, yaw),
                       p["v_cross"], VEHICLE_L, VEHICLE_W),)


def _hazard_near_collision(episode) -> bool:
    best = math.inf
    for f in episode.frames:
        e = f.ego.pose
        for a in f.agents:
            if a.id == "crosser":
                best = min(best, math.hypot(a.pose.x - e.x, a.pose.y - e.y))
    return best < 8.0


def _sample_left_turn(rng, env, base):
    params = dict(base)
    params["v_des"] = base["v_des"] * 0.7
    params["x_int"] = float(rng.uniform(20.0, 27.0))
    params["x0_onc"] = float(rng.uniform(55.0, 75.0))
    params["v_onc"] = float(rng.uniform(6.0, 8.5))
    m = intersection_map(x_int=params["x_int"], turn="left")
    lanes = m.lanes + (np.array([[180.0, -m.lane_width], [-30.0, -m.lane_width]]),)
    m = RoadMap(lanes=lanes, lane_width=m.lane_width, route=m.route,
                intersections=m.intersections, signals=m.signals)
    return params, m


def _init_left_turn(spec):
    p = spec.params
    lw = spec.map.lane_width
    return (AgentState("oncoming", "vehicle", Pose(p["x0_onc"], -lw, 0.0, math.pi),
                       p["v_onc"], VEHICLE_L, VEHICLE_W),)


def _step_left_turn(spec, t, agents, ego, dt):
    """Oncoming traffic holds speed but brakes defensively if the ego is
    blocking its lane close ahead."""
    p = spec.params
    out = []
    for a in agents:
        if a.id != "oncoming":
            out.append(a)
            continue
        blocked = (abs(ego.pose.y - a.pose.y) < 4.5
                   and 0.0 < a.pose.x - ego.pose.x < 30.0)
        accel = -4.0 if blocked else min(1.0, (p["v_onc"] - a.v) * 2.0)
        out.append(agent_moved(a, dt, accel=accel))
    return tuple(out)


def _hazard_left_turn(episode) -> bool:
    best = math.inf
    for f in episode.frames:
        e = f.ego.pose
        for a in f.agents:
            if a.id == "oncoming":
                best = min(best, math.hypot(a.pose.x - e.x, a.pose.y - e.y))
    return best < 20.0


# ---------------------------------------------------------------------------
# Common-driving pseudo-categories

def _sample_e2d(rng, env, base):
    params = dict(base)
    params["lead_gap"] = float(rng.uniform(45.0, 70.0))
    params["turn_dir"] = 0.0
    return params, straight_map()


def _init_e2d(spec):
    p = spec.params
    return (AgentState("lead", "vehicle", Pose(p["lead_gap"], 0.0, 0.0, 0.0),
                       p["v_des"], VEHICLE_L, VEHICLE_W),)


def _sample_h2d(rng, env, base):
    params = dict(base)
    if rng.random() < P_TURN:
        params["turn_dir"] = float(rng.choice([-1.0, 1.0]))
        params["radius"] = float(rng.uniform(14.0, 20.0))
        params["approach"] = float(rng.uniform(12.0, 18.0))
        params["v_des"] = base["v_des"] * 0.7
        m = turn_map("left" if params["turn_dir"] < 0 else "right",
                     radius=params["radius"], approach=params["approach"])
    else:
        params["turn_dir"] = 0.0
        m = straight_map()
    return params, m


def _init_none(spec):
    return ()


# ---------------------------------------------------------------------------
# Registry

REGISTRY: dict[str, CategoryDef] = {}


def _register(defn: CategoryDef) -> None:
    REGISTRY[defn.name] = defn


_register(CategoryDef("TemporaryParkingAhead", True, False, _sample_parking,
                      _init_parking, _step_static, _hazard_parking))
_register(CategoryDef("RoadworkAhead", True, False, _sample_roadwork,
                      _init_roadwork, _step_static, _hazard_roadwork))
_register(CategoryDef("JaywalkingPedestrians", True, False, _sample_jaywalk,
                      _init_jaywalk, _step_crossing_ped, _hazard_ped_in_lane))
_register(CategoryDef("LaneInvasion", True, False, _sample_invasion,
                      _init_invasion, _step_invasion, _hazard_invasion))
_register(CategoryDef("OpposingLaneEncroachment", True, False, _sample_encroach,
                      _init_encroach, _step_forward_agents, _hazard_encroach))
_register(CategoryDef("ParkedVehicleActivation", True, False, _sample_activation,
                      _init_activation, _step_activation, _hazard_activation))
_register(CategoryDef("RedLightRunner", True, False, _sample_red_runner,
                      _init_red_runner, _step_forward_agents, _hazard_red_runner))
_register(CategoryDef("SuddenCutIn", True, False, _sample_cut_in,
                      _init_cut_in, _step_cut_in, _hazard_cut_in))
_register(CategoryDef("NearCollision", True, False, _sample_near_collision,
                      _init_near_collision, _step_forward_agents, _hazard_near_collision))
_register(CategoryDef("SuddenLeadBraking", True, True, _sample_lead_brake,
                      _init_lead_brake, _step_lead_brake, _hazard_lead_brake))
_register(CategoryDef("OccludedCrossing", True, True, _sample_occluded,
                      _init_occluded, _step_crossing_ped, _hazard_ped_in_lane))
_register(CategoryDef("AbruptPedestrianOnTurn", True, True, _sample_ped_on_turn,
                      _init_ped_on_turn, _step_ped_on_turn, _hazard_ped_in_lane))
_register(CategoryDef("UnprotectedLeftTurn", True, True, _sample_left_turn,
                      _init_left_turn, _step_left_turn, _hazard_left_turn))
_register(CategoryDef("E2DCommon", False, False, _sample_e2d, _init_e2d, _step_forward_agents))
_register(CategoryDef("H2DEnvironmental", False, False, _sample_h2d, _init_none, _step_static))


def list_categories(long_tail_only: bool = False) -> list[str]:
    """All category names in registry order; optionally only the long tail."""
    if long_tail_only:
        return [d.name for d in REGISTRY.values() if d.long_tail]
    return list(REGISTRY)


def category_info(name: str) -> CategoryDef:
    try:
        return REGISTRY[name]
    except KeyError:
        raise RegistryError(f"unknown scenario category {name!r}") from None


def _draw_env(rng: np.random.Generator) -> EnvCondition:
    time = "day" if rng.random() < P_DAY else "night"
    weather = "sunny" if rng.random() < P_SUNNY else "rainy"
    return EnvCondition(time, weather)


def instantiate_scenario(category: str, seed: int) -> ScenarioSpec:
    """Deterministically draw a scenario instance for (category, seed)."""
    defn = category_info(category)
    idx = list(REGISTRY).index(category)
    rng = np.random.default_rng([int(seed), idx, 0x5D])
    if category == "E2DCommon":
        env = EnvCondition("day", "sunny")
        base = _base_speeds(rng, env)
        params, m = defn.sample(rng, env, base)
        return ScenarioSpec(category, params, env, m, int(seed))
    if category == "H2DEnvironmental":
        # At least one hard condition; redraw while (day, sunny, straight).
        for _ in range(64):
            env = _draw_env(rng)
            base = _base_speeds(rng, env)
            params, m = defn.sample(rng, env, base)
            if env.time == "night" or env.weather == "rainy" or params["turn_dir"] != 0.0:
                return ScenarioSpec(category, params, env, m, int(seed))
        raise SchemaError("failed to draw a hard condition")
    env = _draw_env(rng)
    base = _base_speeds(rng, env)
    params, m = defn.sample(rng, env, base)
    return ScenarioSpec(category, params, env, m, int(seed))


def scenario_command(spec: ScenarioSpec) -> str:
    """High-level driving command implied by the route geometry."""
    if spec.category == "UnprotectedLeftTurn":
        return "turn left"
    if spec.category == "AbruptPedestrianOnTurn":
        return "turn left" if spec.params["direction"] < 0 else "turn right"
    turn_dir = spec.params.get("turn_dir", 0.0)
    if turn_dir < 0:
        return "turn left"
    if turn_dir > 0:
        return "turn right"
    return "move forward"


def hazard_triggered(episode) -> bool:
    """True if the episode's category hazard actually occurred."""
    defn = category_info(episode.spec.category)
    if defn.hazard is None:
        return True
    return defn.hazard(episode)
