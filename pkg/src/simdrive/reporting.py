"""Plain-text metric tables and SVG scene overlays.

Overlays draw the road edges as paths, agents as polygons, and exactly
three polylines: ground truth (red), baseline (yellow), and the evaluated
planner (green).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curation import EpisodeRecord
from .evaluation import MetricsReport

SLICE_ORDER = ("all", "day", "night", "straight", "turn", "sunny", "rainy", "E2D", "H2D")

TRAJECTORY_COLORS = {"gt": "red", "baseline": "gold", "model": "green"}


def slice_assignments(records: list[EpisodeRecord]) -> dict[str, list[str]]:
    """Record ids per reporting slice. H2D is the union of night, turn, and
    rainy records; E2D is the complement."""
    out: dict[str, list[str]] = {name: [] for name in SLICE_ORDER}
    for r in records:
        labels = r.labels()
        out["all"].append(r.id)
        out[labels["time"]].append(r.id)
        out[labels["weather"]].append(r.id)
        out[labels["maneuver"]].append(r.id)
        out[labels["difficulty"]].append(r.id)
    return {k: v for k, v in out.items() if v}


def _metric_cells(values: dict[str, float], fmt: str = "{:.2f}") -> list[str]:
    return [fmt.format(values[k]) for k in ("1s", "2s", "3s", "avg")]


def format_metrics_table(reports: list[MetricsReport], slice_name: str = "all") -> str:
    """One table: a row per method, 12 metric cells (L2 / collision / boundary)."""
    header = (f"{'Method':<16} | {'L2 (m)':<27} | {'Collision (%)':<27} | {'Boundary (%)':<27}\n"
              f"{'':<16} | " + " | ".join([" ".join(f"{h:>6}" for h in ("1s", "2s", "3s", "avg"))] * 3))
    lines = [f"[slice: {slice_name}]", header, "-" * len(header.splitlines()[0])]
    for rep in reports:
        if slice_name not in rep.slices:
            continue
        s = rep.slices[slice_name]
        cells = [" ".join(f"{c:>6}" for c in _metric_cells(s.l2)),
                 " ".join(f"{c:>6}" for c in _metric_cells(s.collision_pct)),
                 " ".join(f"{c:>6}" for c in _metric_cells(s.boundary_pct))]
        lines.append(f"{rep.method:<16} | " + " | ".join(cells))
    return "\n".join(lines)


def format_full_report(reports: list[MetricsReport]) -> str:
    present = [s for s in SLICE_ORDER
               if any(s in rep.slices for rep in reports)]
    return "\n\n".join(format_metrics_table(reports, s) for s in present)


def format_delta(new: float, old: float) -> str:
    """Value with its relative change versus a reference, arrow style."""
    if old == 0:
        return f"{new:.2f} (n/a)"
    change = (new - old) / old * 100.0
    arrow = "↓" if change <= 0 else "↑"
    return f"{new:.2f} ({arrow}{abs(change):.1f}%)"


# ---------------------------------------------------------------------------
# SVG overlays

@dataclass
class OverlayScene:
    """World-frame content for one overlay drawing."""

    lane_edges: list[np.ndarray]
    agent_corners: list[np.ndarray]
    gt: np.ndarray
    baseline: np.ndarray
    model: np.ndarray


def _poly_points(points: np.ndarray, tx, ty, scale: float) -> str:
    return " ".join(f"{tx(p[0]):.1f},{ty(p[1]):.1f}" for p in np.atleast_2d(points))


def render_overlay_svg(scene: OverlayScene, width: int = 640) -> str:
    """Standalone SVG with exactly three trajectory polylines."""
    all_pts = [np.atleast_2d(a) for a in
               scene.lane_edges + scene.agent_corners + [scene.gt, scene.baseline, scene.model]]
    stacked = np.vstack([p for p in all_pts if len(p)])
    x_min, y_min = stacked.min(axis=0) - 3.0
    x_max, y_max = stacked.max(axis=0) + 3.0
    scale = width / max(x_max - x_min, 1e-6)
    height = int(math.ceil((y_max - y_min) * scale))

    def tx(x: float) -> float:
        return (x - x_min) * scale

    def ty(y: float) -> float:
        return (y_max - y) * scale  # flip: SVG y grows downward

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for edge in scene.lane_edges:
        d = "M " + " L ".join(f"{tx(p[0]):.1f} {ty(p[1]):.1f}" for p in edge)
        parts.append(f'<path d="{d}" fill="none" stroke="#888" stroke-width="1.5"/>')
    for corners in scene.agent_corners:
        parts.append(f'<polygon points="{_poly_points(corners, tx, ty, scale)}" '
                     f'fill="#b0c4de" stroke="#333" stroke-width="1"/>')
    for name, traj in (("gt", scene.gt), ("baseline", scene.baseline), ("model", scene.model)):
        color = TRAJECTORY_COLORS[name]
        parts.append(f'<polyline points="{_poly_points(traj, tx, ty, scale)}" '
                     f'fill="none" stroke="{color}" stroke-width="2.5"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def lane_edge_polylines(lanes, lane_width: float) -> list[np.ndarray]:
    """Left/right boundary polylines offset from each centerline."""
    edges = []
    half = lane_width / 2.0
    for lane in lanes:
        lane = np.asarray(lane, dtype=float)
        seg = np.diff(lane, axis=0)
        norms = np.linalg.norm(seg, axis=1, keepdims=True)
        tangents = seg / np.where(norms == 0, 1.0, norms)
        vertex_t = np.vstack([tangents[0], (tangents[:-1] + tangents[1:]) / 2.0, tangents[-1]])
        vn = np.linalg.norm(vertex_t, axis=1, keepdims=True)
        vertex_t = vertex_t / np.where(vn == 0, 1.0, vn)
        normal = np.stack([-vertex_t[:, 1], vertex_t[:, 0]], axis=1)
        edges.append(lane + half * normal)
        edges.append(lane - half * normal)
    return edges
