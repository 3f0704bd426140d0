"""Deterministic planar micro-simulator: roads, scripted agents, the
long-tail scenario registry, and the privileged rule-based teacher."""

from .episodes import (
    ANCHOR_INDEX,
    Episode,
    EpisodeLabels,
    Frame,
    classify_episode,
    episode_from_json_obj,
    episode_has_overlap,
    episode_to_json_obj,
    simulate_episode,
)
from .grid import DrivableGrid, drivable_grid
from .scenarios import (
    REGISTRY,
    CategoryDef,
    ScenarioSpec,
    category_info,
    hazard_triggered,
    instantiate_scenario,
    list_categories,
    scenario_command,
)
from .teacher import EGO_LENGTH, EGO_WIDTH, TeacherConfig, WorldView, teacher_plan
from .world import (
    AgentState,
    EgoState,
    EnvCondition,
    InvalidControlError,
    RoadMap,
    SignalSchedule,
    step_ego,
    straight_map,
    turn_map,
)

__all__ = [
    "ANCHOR_INDEX",
    "AgentState",
    "CategoryDef",
    "DrivableGrid",
    "EGO_LENGTH",
    "EGO_WIDTH",
    "EgoState",
    "EnvCondition",
    "Episode",
    "EpisodeLabels",
    "Frame",
    "InvalidControlError",
    "REGISTRY",
    "RoadMap",
    "ScenarioSpec",
    "SignalSchedule",
    "TeacherConfig",
    "WorldView",
    "category_info",
    "classify_episode",
    "drivable_grid",
    "episode_from_json_obj",
    "episode_has_overlap",
    "episode_to_json_obj",
    "hazard_triggered",
    "instantiate_scenario",
    "list_categories",
    "scenario_command",
    "simulate_episode",
    "step_ego",
    "straight_map",
    "teacher_plan",
    "turn_map",
]
