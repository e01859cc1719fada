from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud


@dataclass
class VoxelGrid:
    """Sparse occupancy grid; ``cells`` maps integer (i, j, k) to mean RGB."""

    origin: np.ndarray
    resolution: float
    cells: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def is_occupied(self, index) -> bool:
        return tuple(int(v) for v in index) in self.cells

    def cell_bounds(self, index):
        lo = self.origin + np.asarray(index, dtype=np.float64) * self.resolution
        return lo, lo + self.resolution


def _cell_keys(xyz: np.ndarray, origin: np.ndarray, cell: float):
    idx = np.floor((xyz - origin) / cell).astype(np.int64)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    return keys, inverse.reshape(-1)


def _group_mean(values: np.ndarray, inverse: np.ndarray, n: int) -> np.ndarray:
    counts = np.bincount(inverse, minlength=n).astype(np.float64)
    out = np.empty((n, values.shape[1]))
    for c in range(values.shape[1]):
        out[:, c] = np.bincount(inverse, weights=values[:, c], minlength=n) / counts
    return out


def voxel_subsample(cloud: PointCloud, cell: float, origin=(0.0, 0.0, 0.0)) -> PointCloud:
    """One point per occupied cell at the centroid of its points, with mean color.

    When the cloud is labeled, each output point takes the most frequent label
    of its cell (lowest code on ties).
    """
    if cell <= 0:
        raise ValueError("cell size must be positive")
    cloud.require_points()
    origin = np.asarray(origin, dtype=np.float64)
    keys, inv = _cell_keys(cloud.xyz, origin, cell)
    n = len(keys)
    # centroids taken relative to each cell's corner to limit cancellation
    corner = origin + keys * cell
    xyz = corner + _group_mean(cloud.xyz - corner[inv], inv, n)
    rgb = np.clip(np.rint(_group_mean(cloud.rgb.astype(np.float64), inv, n)), 0, 255)
    labels = None
    if cloud.labels is not None:
        tally = np.zeros((n, 4), dtype=np.int64)
        np.add.at(tally, (inv, cloud.labels.astype(np.int64)), 1)
        labels = tally.argmax(axis=1).astype(np.uint8)
    return PointCloud(xyz, rgb.astype(np.uint8), labels, cloud.geo_origin, cloud.crs_tag)


def voxelize(cloud: PointCloud, resolution: float, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    cloud.require_points()
    origin = np.asarray(origin, dtype=np.float64)
    keys, inv = _cell_keys(cloud.xyz, origin, resolution)
    mean_rgb = _group_mean(cloud.rgb.astype(np.float64), inv, len(keys))
    counts = np.bincount(inv, minlength=len(keys))
    grid = VoxelGrid(origin, float(resolution))
    for key, color, count in zip(keys.tolist(), mean_rgb.tolist(), counts.tolist()):
        grid.cells[tuple(key)] = tuple(color)
        grid.counts[tuple(key)] = count
    return grid
