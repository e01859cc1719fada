"""Ground extraction and post-segmentation label refinement.

``smooth_labels`` and ``clean_building_points`` are deterministic local rules
standing in for CRF-based refinement; they make no claim of equivalence.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from scipy.spatial import cKDTree

from .core.cloud import ClassLabel, PointCloud, as_ids
from .core.spatial import connected_components


@dataclass(frozen=True)
class GroundParams:
    grid_cell: float = 5.0
    height_tol: float = 0.5
    slope_tol: float = 0.35

    def __post_init__(self):
        if min(self.grid_cell, self.height_tol, self.slope_tol) <= 0:
            raise ValueError("ground parameters must be positive")


@dataclass(frozen=True)
class SmoothParams:
    radius: float = 1.5
    iterations: int = 2
    color_tol: float = 30.0
    clean_radius: float = 1.5

    def __post_init__(self):
        if self.radius <= 0 or self.clean_radius <= 0:
            raise ValueError("smoothing radii must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.color_tol < 0:
            raise ValueError("color_tol must be non-negative")


def _grow_seeds(seed_xyz: np.ndarray, cells: np.ndarray, params: GroundParams) -> np.ndarray:
    """Breadth-first growth over 8-adjacent grid cells starting at the lowest seed.

    A neighboring seed joins when its rise over run to an accepted seed is at
    most ``slope_tol``; run is floored at one grid cell so that noise between
    nearby seeds does not read as steep slope.
    """
    lookup = {tuple(c): k for k, c in enumerate(cells.tolist())}
    accepted = np.zeros(len(cells), dtype=bool)
    start = int(np.argmin(seed_xyz[:, 2]))
    accepted[start] = True
    queue = deque([start])
    while queue:
        k = queue.popleft()
        ci, cj = cells[k]
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                m = lookup.get((ci + di, cj + dj))
                if m is None or accepted[m]:
                    continue
                run = max(np.hypot(*(seed_xyz[m, :2] - seed_xyz[k, :2])), params.grid_cell)
                if abs(seed_xyz[m, 2] - seed_xyz[k, 2]) <= params.slope_tol * run:
                    accepted[m] = True
                    queue.append(m)
    return accepted


def ground_surface(cloud: PointCloud, params: GroundParams = GroundParams()):
    """Accepted ground seeds (one lowest point per grid cell) as an (M, 3) array."""
    cloud.require_points()
    xyz = cloud.xyz
    cells = np.floor((xyz[:, :2] - xyz[:, :2].min(axis=0)) / params.grid_cell).astype(np.int64)
    order = np.lexsort((xyz[:, 2], cells[:, 1], cells[:, 0]))
    sc = cells[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(sc[1:] != sc[:-1], axis=1)
    seeds = order[first]
    accepted = _grow_seeds(xyz[seeds], cells[seeds], params)
    return xyz[seeds[accepted]]


def extract_ground(cloud: PointCloud, params: GroundParams = GroundParams()) -> np.ndarray:
    """Ids of points lying at most ``height_tol`` above the surface through the
    accepted grid-minimum seeds."""
    seeds = ground_surface(cloud, params)
    xy = cloud.xyz[:, :2]
    nearest = NearestNDInterpolator(seeds[:, :2], seeds[:, 2])
    if len(seeds) >= 3 and np.linalg.matrix_rank(seeds[:, :2] - seeds[0, :2]) == 2:
        surf = LinearNDInterpolator(seeds[:, :2], seeds[:, 2])(xy)
        outside = np.isnan(surf)
        surf[outside] = nearest(xy[outside])
    else:
        surf = nearest(xy)
    return np.flatnonzero(cloud.xyz[:, 2] - surf <= params.height_tol)


def ground_postprocess(cloud: PointCloud, ground_ids, link: float = 1.0, min_comp: int = 100):
    """Keep ground points in connected components of at least ``min_comp`` points.

    Returns ``(kept, dropped)`` id arrays; dropped points should be relabeled
    as non-ground.
    """
    ground = as_ids(ground_ids, len(cloud))
    _, kept = connected_components(cloud, ground, link, min_comp)
    return kept, np.setdiff1d(ground, kept, assume_unique=True)


def _smooth_once(pairs, labels, movable):
    n = len(labels)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    nb = np.bincount(src, weights=labels[dst] == ClassLabel.BUILDING, minlength=n)
    nt = np.bincount(src, weights=labels[dst] == ClassLabel.TREE, minlength=n)
    out = labels.copy()
    out[movable & (nb > nt)] = ClassLabel.BUILDING
    out[movable & (nt > nb)] = ClassLabel.TREE
    return out


def smooth_labels(cloud: PointCloud, labels, params: SmoothParams = SmoothParams()) -> np.ndarray:
    """Synchronous majority vote over Building/Tree neighbors within ``radius``.

    Each Building or Tree point adopts the strictly more frequent of the two
    labels among its other non-ground neighbors; ties keep the current label.
    Ground and unlabeled points never change and are not counted.
    """
    labels = np.asarray(labels).astype(np.uint8)
    if len(labels) != len(cloud):
        raise ValueError("one label per point required")
    movable = (labels == ClassLabel.BUILDING) | (labels == ClassLabel.TREE)
    ids = np.flatnonzero(movable)
    if ids.size < 2:
        return labels.copy()
    pairs = cKDTree(cloud.xyz[ids]).query_pairs(params.radius, output_type="ndarray")
    sub = labels[ids]
    for _ in range(params.iterations):
        nxt = _smooth_once(pairs, sub, np.ones(len(sub), dtype=bool))
        if np.array_equal(nxt, sub):
            break
        sub = nxt
    out = labels.copy()
    out[ids] = sub
    return out


def clean_building_points(cloud: PointCloud, labels, params: SmoothParams = SmoothParams()) -> np.ndarray:
    """Relabel as Building each Tree point lying within ``clean_radius`` of a
    Building point whose RGB distance to it is at most ``color_tol``.

    Single pass against the input labeling.
    """
    labels = np.asarray(labels).astype(np.uint8)
    if len(labels) != len(cloud):
        raise ValueError("one label per point required")
    tree = np.flatnonzero(labels == ClassLabel.TREE)
    bldg = np.flatnonzero(labels == ClassLabel.BUILDING)
    out = labels.copy()
    if tree.size == 0 or bldg.size == 0:
        return out
    pairs = cKDTree(cloud.xyz[tree]).sparse_distance_matrix(
        cKDTree(cloud.xyz[bldg]), params.clean_radius, output_type="ndarray")
    if len(pairs) == 0:
        return out
    diff = cloud.rgb[tree[pairs["i"]]].astype(np.float64) - cloud.rgb[bldg[pairs["j"]]]
    close = np.sqrt((diff ** 2).sum(axis=1)) <= params.color_tol
    out[tree[np.unique(pairs["i"][close])]] = ClassLabel.BUILDING
    return out
