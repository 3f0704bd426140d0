"""Boolean drivable-area raster built from lane centerlines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SchemaError
from .world import RoadMap, distance_to_polyline


@dataclass(frozen=True)
class DrivableGrid:
    """Occupancy raster: cell (i, j) covers
    [x0 + j*res, x0 + (j+1)*res) x [y0 + i*res, y0 + (i+1)*res)."""

    x0: float
    y0: float
    resolution: float
    data: np.ndarray  # (rows, cols) bool, True = drivable

    def cell_index(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        j = np.floor((p[:, 0] - self.x0) / self.resolution).astype(int)
        i = np.floor((p[:, 1] - self.y0) / self.resolution).astype(int)
        return i, j

    def contains(self, points: np.ndarray) -> np.ndarray:
        i, j = self.cell_index(points)
        rows, cols = self.data.shape
        return (i >= 0) & (i < rows) & (j >= 0) & (j < cols)

    def drivable_at(self, points: np.ndarray) -> np.ndarray:
        """Drivability of the cell containing each point; False off-grid."""
        i, j = self.cell_index(points)
        rows, cols = self.data.shape
        inside = (i >= 0) & (i < rows) & (j >= 0) & (j < cols)
        out = np.zeros(len(i), dtype=bool)
        if inside.any():
            out[inside] = self.data[i[inside], j[inside]]
        return out


def drivable_grid(road_map: RoadMap, resolution: float = 0.25, margin: float = 3.0) -> DrivableGrid:
    """Rasterize the map: a cell is drivable iff its center lies within
    half a lane width of any centerline.

    The grid origin snaps to a multiple of the resolution so straight,
    axis-aligned lane boundaries land on cell edges.
    """
    if not (0.1 <= resolution <= 1.0):
        raise SchemaError(f"resolution must be in [0.1, 1.0], got {resolution}")
    if not road_map.lanes:
        raise SchemaError("cannot rasterize an empty map")
    pts = np.vstack(road_map.lanes)
    pad = road_map.lane_width / 2.0 + margin
    x0 = math.floor((pts[:, 0].min() - pad) / resolution) * resolution
    y0 = math.floor((pts[:, 1].min() - pad) / resolution) * resolution
    x1 = math.ceil((pts[:, 0].max() + pad) / resolution) * resolution
    y1 = math.ceil((pts[:, 1].max() + pad) / resolution) * resolution
    cols = int(round((x1 - x0) / resolution))
    rows = int(round((y1 - y0) / resolution))
    xs = x0 + (np.arange(cols) + 0.5) * resolution
    ys = y0 + (np.arange(rows) + 0.5) * resolution
    xx, yy = np.meshgrid(xs, ys)
    centers = np.stack([xx.ravel(), yy.ravel()], axis=1)
    half = road_map.lane_width / 2.0
    drivable = np.zeros(len(centers), dtype=bool)
    for lane in road_map.lanes:
        todo = ~drivable
        if not todo.any():
            break
        drivable[todo] |= distance_to_polyline(centers[todo], lane) <= half
    return DrivableGrid(x0=x0, y0=y0, resolution=resolution,
                        data=drivable.reshape(rows, cols))
