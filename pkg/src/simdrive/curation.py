"""Dataset records, whole-record coordinate alignment, stratified
balancing toward target ratios, and JSONL serialization.

A record is one training/evaluation sample: five history frames, six
camera calibrations, the command, and the six future waypoints and speeds
in the current-ego frame. Records carry the frame convention their
numbers are expressed in; :func:`align_record` re-expresses everything in
another convention.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import QuotaShortfallError, RecordParseError, SchemaError
from .geometry import (
    LATERAL_MIRROR,
    CameraCalibration,
    FrameConvention,
    Pose,
    RoofOffset,
    Transform4,
    compose,
    convention_change_matrix,
    convention_from_name,
    convert_pose,
    normalize_angle,
)
from .simworld import ANCHOR_INDEX, Episode, classify_episode, scenario_command
from .simworld.episodes import Frame, frame_from_json_obj, frame_to_json_obj
from .simworld.world import AgentState, EgoState

N_HISTORY = 5
N_CAMERAS = 6
N_WAYPOINTS = 6


@dataclass(frozen=True)
class EpisodeRecord:
    id: str
    provenance: str  # "sim" | "real"
    city: str
    env: dict[str, str]  # {"time": ..., "weather": ...}
    maneuver: str  # "straight" | "turn"
    scenario: str
    frame_convention: str
    cameras: tuple[CameraCalibration, ...]
    history: tuple[Frame, ...]
    command: str
    gt_waypoints: np.ndarray  # (6, 2), current-ego frame
    gt_speeds: np.ndarray  # (6,)
    difficulty: str = "E2D"

    def __post_init__(self) -> None:
        if self.provenance not in ("sim", "real"):
            raise SchemaError(f"provenance must be 'sim' or 'real', got {self.provenance!r}")
        if len(self.cameras) != N_CAMERAS:
            raise SchemaError(f"expected {N_CAMERAS} cameras, got {len(self.cameras)}", field="cameras")
        if len(self.history) != N_HISTORY:
            raise SchemaError(f"expected {N_HISTORY} history frames, got {len(self.history)}", field="history")
        wp = np.asarray(self.gt_waypoints, dtype=float)
        sp = np.asarray(self.gt_speeds, dtype=float)
        if wp.shape != (N_WAYPOINTS, 2):
            raise SchemaError(f"expected {N_WAYPOINTS} waypoints, got shape {wp.shape}", field="gt_waypoints")
        if sp.shape != (N_WAYPOINTS,):
            raise SchemaError(f"expected {N_WAYPOINTS} speeds, got shape {sp.shape}", field="gt_speeds")
        if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(sp))):
            raise SchemaError("waypoints and speeds must be finite")
        wp.setflags(write=False)
        sp.setflags(write=False)
        object.__setattr__(self, "gt_waypoints", wp)
        object.__setattr__(self, "gt_speeds", sp)

    def labels(self) -> dict[str, str]:
        return {
            "time": self.env["time"],
            "weather": self.env["weather"],
            "maneuver": self.maneuver,
            "difficulty": self.difficulty,
            "provenance": self.provenance,
        }


def record_from_episode(
    episode: Episode,
    cameras: tuple[CameraCalibration, ...],
    provenance: str = "sim",
    city: str = "Town13",
    anchor_index: int = ANCHOR_INDEX,
    convention: str = "LH_FRU_WHEEL",
) -> EpisodeRecord:
    """Cut one record out of an episode at the anchor frame.

    History is the anchor frame and the four before it; the six future ego
    positions are rotated into the anchor-ego frame.
    """
    if anchor_index < N_HISTORY - 1 or anchor_index + N_WAYPOINTS >= len(episode.frames):
        raise SchemaError(f"anchor {anchor_index} leaves no room for history or future")
    frames = episode.frames
    anchor = frames[anchor_index].ego.pose
    cos_a, sin_a = math.cos(anchor.yaw), math.sin(anchor.yaw)
    waypoints = []
    speeds = []
    for k in range(1, N_WAYPOINTS + 1):
        fut = frames[anchor_index + k].ego
        dx = fut.pose.x - anchor.x
        dy = fut.pose.y - anchor.y
        waypoints.append((cos_a * dx + sin_a * dy, -sin_a * dx + cos_a * dy))
        speeds.append(fut.v)
    labels = classify_episode(episode, anchor_index)
    return EpisodeRecord(
        id=f"{provenance}-{episode.id}-a{anchor_index}",
        provenance=provenance,
        city=city,
        env={"time": labels.time, "weather": labels.weather},
        maneuver=labels.maneuver,
        scenario=episode.spec.category,
        frame_convention=convention,
        cameras=tuple(cameras),
        history=tuple(frames[anchor_index - N_HISTORY + 1: anchor_index + 1]),
        command=scenario_command(episode.spec),
        gt_waypoints=np.array(waypoints),
        gt_speeds=np.array(speeds),
        difficulty=labels.difficulty,
    )


# ---------------------------------------------------------------------------
# Alignment

def _convert_agent(a: AgentState, src, dst, off) -> AgentState:
    return replace(a, pose=convert_pose(a.pose, src, dst, off))


def _convert_frame(f: Frame, src, dst, off) -> Frame:
    return Frame(
        t=f.t,
        ego=EgoState(pose=convert_pose(f.ego.pose, src, dst, off), v=f.ego.v),
        agents=tuple(_convert_agent(a, src, dst, off) for a in f.agents),
        signals=f.signals,
    )


def align_record(
    r: EpisodeRecord,
    target: FrameConvention,
    off: RoofOffset = RoofOffset(),
) -> EpisodeRecord:
    """Re-express every pose, waypoint, and camera extrinsic of a record.

    Waypoints are ego-frame vectors, so only their lateral sign flips.
    Camera extrinsics get the full convention change on the ego side and a
    lateral mirror on the camera side (the camera's own frame flips
    handedness but keeps its physical origin).
    """
    src = convention_from_name(r.frame_convention)
    if src == target:
        return r
    c_full = convention_change_matrix(src, target, off)
    waypoints = np.asarray(r.gt_waypoints, dtype=float).copy()
    waypoints[:, 1] = -waypoints[:, 1]
    cameras = tuple(
        replace(cam, T_cam_to_ego=compose(compose(c_full, cam.T_cam_to_ego), LATERAL_MIRROR))
        for cam in r.cameras
    )
    history = tuple(_convert_frame(f, src, target, off) for f in r.history)
    return replace(r, frame_convention=target.name, cameras=cameras,
                   history=history, gt_waypoints=waypoints)


# ---------------------------------------------------------------------------
# Stratified sampling

@dataclass(frozen=True)
class StratumQuota:
    """Target fractions per dimension; each dimension's fractions sum to 1."""

    dims: dict[str, dict[str, float]]

    def __post_init__(self) -> None:
        known = {"time", "weather", "maneuver", "difficulty", "provenance"}
        for dim, fractions in self.dims.items():
            if dim not in known:
                raise SchemaError(f"unknown quota dimension {dim!r}")
            total = sum(fractions.values())
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise SchemaError(f"fractions for {dim!r} sum to {total}, expected 1")
            if any(not (0.0 <= v <= 1.0) for v in fractions.values()):
                raise SchemaError(f"fractions for {dim!r} must lie in [0, 1]")

    def cells(self) -> list[tuple[tuple[str, str], ...]]:
        """Joint strata: the cartesian product over dimensions."""
        items = sorted(self.dims.items())
        cells: list[tuple[tuple[str, str], ...]] = [()]
        for dim, fractions in items:
            cells = [c + ((dim, value),) for c in cells for value in sorted(fractions)]
        return cells

    def cell_fraction(self, cell: tuple[tuple[str, str], ...]) -> float:
        frac = 1.0
        for dim, value in cell:
            frac *= self.dims[dim][value]
        return frac


# Target mixes as exact sample counts; formatted they reproduce the
# published two-decimal percentages.
_HASS_COUNTS = {
    "time": {"day": 27891, "night": 19662},
    "weather": {"sunny": 23010, "rainy": 24543},
    "maneuver": {"straight": 22076, "turn": 25477},
}
_REAL_COUNTS = {
    "time": {"day": 24745, "night": 3385},
    "weather": {"sunny": 22548, "rainy": 5582},
    "maneuver": {"straight": 24996, "turn": 3134},
}


def _quota_from_counts(counts: dict[str, dict[str, int]]) -> StratumQuota:
    dims = {}
    for dim, values in counts.items():
        total = sum(values.values())
        dims[dim] = {k: float(Fraction(v, total)) for k, v in values.items()}
        # Exact sum-to-one despite float conversion.
        first = sorted(values)[0]
        dims[dim][first] = 1.0 - sum(v for k, v in dims[dim].items() if k != first)
    return StratumQuota(dims)


QUOTA_PRESETS: dict[str, StratumQuota] = {
    "HASS": _quota_from_counts(_HASS_COUNTS),
    "nuScenes-like": _quota_from_counts(_REAL_COUNTS),
}


def quota_preset(name: str) -> StratumQuota:
    for key, preset in QUOTA_PRESETS.items():
        if key.lower().replace("-", "_") == name.lower().replace("-", "_"):
            return preset
    raise SchemaError(f"unknown quota preset {name!r}; available: {sorted(QUOTA_PRESETS)}")


@dataclass(frozen=True)
class Shortfall:
    cell: tuple[tuple[str, str], ...]
    allocated: int
    available: int

    def describe(self) -> str:
        key = ", ".join(f"{d}={v}" for d, v in self.cell)
        return f"{key}: allocated {self.allocated}, available {self.available}"


@dataclass(frozen=True)
class SampleResult:
    records: list[EpisodeRecord]
    allocations: dict[tuple[tuple[str, str], ...], int]
    shortfalls: list[Shortfall] = field(default_factory=list)

    def raise_on_shortfall(self) -> "SampleResult":
        if self.shortfalls:
            detail = "; ".join(s.describe() for s in self.shortfalls)
            raise QuotaShortfallError(f"stratified sample under-filled: {detail}")
        return self


def largest_remainder_allocation(fractions: list[float], n: int) -> list[int]:
    """Integer allocation of ``n`` proportional to ``fractions``.

    Floors first, then hands the remaining units to the largest
    remainders (ties broken by index for determinism).
    """
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def stratified_sample(
    pool: list[EpisodeRecord],
    quota: StratumQuota,
    n: int,
    seed: int = 0,
) -> SampleResult:
    """Draw ``n`` records matching the quota's joint-cell targets.

    Cells are allocated by largest-remainder rounding of ``fraction * n``;
    within a cell, sampling is uniform without replacement. Under-filled
    cells are reported explicitly, never silently dropped.
    """
    if n > len(pool):
        raise SchemaError(f"requested {n} records from a pool of {len(pool)}")
    cells = quota.cells()
    fractions = [quota.cell_fraction(c) for c in cells]
    counts = largest_remainder_allocation(fractions, n)
    by_cell: dict[tuple[tuple[str, str], ...], list[int]] = {c: [] for c in cells}
    for idx, r in enumerate(pool):
        labels = r.labels()
        key = tuple((dim, labels[dim]) for dim, _ in cells[0]) if cells[0] else ()
        if key in by_cell:
            by_cell[key].append(idx)
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    shortfalls: list[Shortfall] = []
    allocations: dict[tuple[tuple[str, str], ...], int] = {}
    for cell, want in zip(cells, counts):
        allocations[cell] = want
        have = by_cell.get(cell, [])
        if want > len(have):
            shortfalls.append(Shortfall(cell=cell, allocated=want, available=len(have)))
            take = len(have)
        else:
            take = want
        if take > 0:
            picked = rng.choice(len(have), size=take, replace=False)
            chosen.extend(have[i] for i in sorted(int(j) for j in picked))
    return SampleResult(records=[pool[i] for i in chosen],
                        allocations=allocations, shortfalls=shortfalls)


# ---------------------------------------------------------------------------
# Balance reporting

BALANCE_DIMENSIONS = {
    "time": ("day", "night"),
    "weather": ("sunny", "rainy"),
    "maneuver": ("straight", "turn"),
}


def balance_report(records: list[EpisodeRecord]) -> dict[str, dict[str, str]]:
    """Counts and percentages per dimension, formatted ``"count (pp.pp%)"``.

    Percentages use round-half-even at two decimals.
    """
    out: dict[str, dict[str, str]] = {}
    total = len(records)
    if total == 0:
        return out
    for dim, values in BALANCE_DIMENSIONS.items():
        counts = {v: 0 for v in values}
        for r in records:
            label = r.labels()[dim]
            counts[label] = counts.get(label, 0) + 1
        out[dim] = {v: f"{c} ({100.0 * c / total:.2f}%)" for v, c in counts.items()}
    return out


def format_balance_report(report: dict[str, dict[str, str]]) -> str:
    lines = []
    for dim, cells in report.items():
        parts = "  ".join(f"{v}: {s}" for v, s in cells.items())
        lines.append(f"{dim:<10} {parts}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# JSONL dataset io

def _camera_to_obj(c: CameraCalibration) -> dict:
    return {
        "name": c.name, "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
        "t_cam_to_ego": c.T_cam_to_ego.to_flat(),
        "width": c.width, "height": c.height,
    }


def _camera_from_obj(obj: dict) -> CameraCalibration:
    return CameraCalibration(
        name=obj["name"], fx=float(obj["fx"]), fy=float(obj["fy"]),
        cx=float(obj["cx"]), cy=float(obj["cy"]),
        T_cam_to_ego=Transform4.from_flat(obj["t_cam_to_ego"]),
        width=int(obj["width"]), height=int(obj["height"]),
    )


def record_to_json_obj(r: EpisodeRecord) -> dict:
    return {
        "id": r.id,
        "provenance": r.provenance,
        "city": r.city,
        "env": dict(r.env),
        "maneuver": r.maneuver,
        "scenario": r.scenario,
        "difficulty": r.difficulty,
        "frame_convention": r.frame_convention,
        "cameras": [_camera_to_obj(c) for c in r.cameras],
        "history": [frame_to_json_obj(f) for f in r.history],
        "command": r.command,
        "gt_waypoints": [[float(x), float(y)] for x, y in r.gt_waypoints],
        "gt_speeds": [float(v) for v in r.gt_speeds],
    }


def record_from_json_obj(obj: dict, line: int | None = None) -> EpisodeRecord:
    try:
        cameras = obj["cameras"]
        if len(cameras) != N_CAMERAS:
            raise SchemaError(f"expected {N_CAMERAS}", field="cameras", line=line)
        history = obj["history"]
        if len(history) != N_HISTORY:
            raise SchemaError(f"expected {N_HISTORY}", field="history", line=line)
        return EpisodeRecord(
            id=obj["id"],
            provenance=obj["provenance"],
            city=obj["city"],
            env={"time": obj["env"]["time"], "weather": obj["env"]["weather"]},
            maneuver=obj["maneuver"],
            scenario=obj["scenario"],
            difficulty=obj.get("difficulty", "E2D"),
            frame_convention=obj["frame_convention"],
            cameras=tuple(_camera_from_obj(c) for c in cameras),
            history=tuple(frame_from_json_obj(f) for f in history),
            command=obj["command"],
            gt_waypoints=np.asarray(obj["gt_waypoints"], dtype=float),
            gt_speeds=np.asarray(obj["gt_speeds"], dtype=float),
        )
    except SchemaError as e:
        if e.line is None and line is not None:
            raise SchemaError(str(e), line=line) from e
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad record: {e}", line=line) from e


def write_records(records: list[EpisodeRecord], stream: io.TextIOBase) -> None:
    """One JSON object per line; floats serialize at full precision."""
    for r in records:
        stream.write(json.dumps(record_to_json_obj(r), sort_keys=True))
        stream.write("\n")


def read_records(stream: io.TextIOBase) -> list[EpisodeRecord]:
    records = []
    for lineno, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise RecordParseError(f"invalid JSON: {e.msg}", line=lineno, offset=e.pos) from e
        records.append(record_from_json_obj(obj, line=lineno))
    return records


def save_records(records: list[EpisodeRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_records(records, fh)


def load_records(path) -> list[EpisodeRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_records(fh)


# ---------------------------------------------------------------------------
# Manifest

@dataclass
class DatasetManifest:
    size: int
    counts: dict[str, dict[str, int]]
    provenance_mix: dict[str, int]
    seeds: list[int]
    toolkit_version: str
    created_at: str = ""

    def to_json_obj(self) -> dict:
        return {
            "size": self.size,
            "counts": self.counts,
            "provenance_mix": self.provenance_mix,
            "seeds": self.seeds,
            "toolkit_version": self.toolkit_version,
            "created_at": self.created_at,
        }


def build_manifest(records: list[EpisodeRecord], seeds: list[int], version: str,
                   created_at: str = "") -> DatasetManifest:
    counts: dict[str, dict[str, int]] = {}
    for dim in ("time", "weather", "maneuver", "difficulty"):
        counts[dim] = {}
        for r in records:
            v = r.labels()[dim]
            counts[dim][v] = counts[dim].get(v, 0) + 1
    prov: dict[str, int] = {}
    for r in records:
        prov[r.provenance] = prov.get(r.provenance, 0) + 1
    return DatasetManifest(size=len(records), counts=counts, provenance_mix=prov,
                           seeds=seeds, toolkit_version=version, created_at=created_at)
