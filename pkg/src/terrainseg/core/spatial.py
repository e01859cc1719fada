"""KD-tree backed neighbor queries and Euclidean connected components."""

from __future__ import annotations

import os

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial import cKDTree

from ..errors import EmptyCloud
from .cloud import PointCloud, as_ids

WORKERS_ENV = "TERRAINSEG_WORKERS"


def workers() -> int:
    """Thread count for tree queries; results do not depend on it."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _coords(cloud_or_xyz) -> np.ndarray:
    if isinstance(cloud_or_xyz, PointCloud):
        return cloud_or_xyz.xyz
    return np.asarray(cloud_or_xyz, dtype=np.float64).reshape(-1, 3)


class SpatialIndex:
    """Immutable 2D (x, y) and 3D KD-trees over a fixed point set."""

    def __init__(self, cloud_or_xyz):
        xyz = _coords(cloud_or_xyz)
        if len(xyz) == 0:
            raise EmptyCloud("cannot index an empty cloud")
        self._xyz = xyz.copy()
        self._xyz.flags.writeable = False
        self._trees = {3: cKDTree(self._xyz), 2: cKDTree(self._xyz[:, :2])}

    def __len__(self) -> int:
        return len(self._xyz)

    @property
    def xyz(self) -> np.ndarray:
        return self._xyz

    def tree(self, dims: int) -> cKDTree:
        if dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        return self._trees[dims]

    def _query_coords(self, query, dims):
        if isinstance(query, (int, np.integer)):
            return self._xyz[int(query), :dims], int(query)
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        return q[:dims], None

    def radius(self, query, r: float, dims: int = 3) -> np.ndarray:
        """Ids within distance ``r`` of ``query``, sorted.

        ``query`` is either coordinates or the integer id of an indexed point;
        in the latter case that point is left out of its own result.
        """
        if r <= 0:
            raise ValueError("radius must be positive")
        q, self_id = self._query_coords(query, dims)
        ids = np.asarray(self.tree(dims).query_ball_point(q, r), dtype=np.int64)
        ids.sort()
        if self_id is not None:
            ids = ids[ids != self_id]
        return ids

    def knn(self, query, k: int, dims: int = 3):
        """``k`` nearest ids and distances; an indexed query id is not its own neighbor."""
        q, self_id = self._query_coords(query, dims)
        extra = 1 if self_id is not None else 0
        kk = min(k + extra, len(self))
        dist, ids = self.tree(dims).query(q, k=kk)
        dist, ids = np.atleast_1d(dist), np.atleast_1d(ids)
        if self_id is not None:
            keep = ids != self_id
            dist, ids = dist[keep], ids[keep]
        return ids[:k].astype(np.int64), dist[:k]

    def counts(self, r: float, dims: int = 3, ids=None) -> np.ndarray:
        """Neighbor counts (self excluded) for indexed points ``ids`` (default: all)."""
        pts = self._xyz[:, :dims] if ids is None else self._xyz[np.asarray(ids), :dims]
        n = self.tree(dims).query_ball_point(pts, r, return_length=True, workers=workers())
        return np.asarray(n, dtype=np.int64) - 1

    def pairs(self, r: float, dims: int = 3) -> np.ndarray:
        """All unordered index pairs ``(i, j)``, ``i < j``, within distance ``r``."""
        p = self.tree(dims).query_pairs(r, output_type="ndarray")
        return p.astype(np.int64).reshape(-1, 2)


def build_spatial_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def radius_neighbors(index: SpatialIndex, query, r: float, dims: int = 3) -> np.ndarray:
    return index.radius(query, r, dims)


def connected_components(cloud, member_ids, link_dist: float = 1.0, min_size: int = 1):
    """Single-linkage clustering of ``member_ids`` at 3D distance ``link_dist``.

    Returns ``(component, survivors)``: ``component[k]`` is the component of
    ``member_ids[k]`` (after sorting), numbered by first appearance, and
    ``survivors`` the sorted ids in components of at least ``min_size``.
    """
    if link_dist <= 0:
        raise ValueError("link_dist must be positive")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    xyz = _coords(cloud)
    ids = as_ids(member_ids, len(xyz))
    if ids.size == 0:
        return np.zeros(0, dtype=np.int64), ids
    pairs = cKDTree(xyz[ids]).query_pairs(link_dist, output_type="ndarray")
    m = len(ids)
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, comp = _cc(graph, directed=False)
    sizes = np.bincount(comp)
    return comp.astype(np.int64), ids[sizes[comp] >= min_size]
