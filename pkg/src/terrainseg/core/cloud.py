from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import EmptyCloud


class ClassLabel(enum.IntEnum):
    UNLABELED = 0
    GROUND = 1
    BUILDING = 2
    TREE = 3


LABEL_NAMES = {
    ClassLabel.GROUND: "ground",
    ClassLabel.BUILDING: "building",
    ClassLabel.TREE: "tree",
}


@dataclass(eq=False)
class PointCloud:
    """Colored 3D points stored relative to a georeference origin.

    ``xyz`` is an (N, 3) float64 array in meters, ``rgb`` an (N, 3) uint8
    array. ``labels`` holds ``ClassLabel`` codes or is ``None``. World
    coordinates are ``xyz + geo_origin`` in the frame named by ``crs_tag``.
    """

    xyz: np.ndarray
    rgb: np.ndarray
    labels: Optional[np.ndarray] = None
    geo_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    crs_tag: str = "local"

    def __post_init__(self):
        self.xyz = np.ascontiguousarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        rgb = np.asarray(self.rgb)
        if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
            raise ValueError("color channels must lie in [0, 255]")
        self.rgb = np.ascontiguousarray(rgb, dtype=np.uint8).reshape(-1, 3)
        if len(self.rgb) != len(self.xyz):
            raise ValueError("rgb and xyz lengths differ")
        if not np.isfinite(self.xyz).all():
            raise ValueError("coordinates must be finite")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(self.xyz),):
                raise ValueError("labels need exactly one entry per point")
            if labels.size and not np.isin(labels, list(ClassLabel)).all():
                raise ValueError("labels must be ClassLabel codes")
            self.labels = labels.astype(np.uint8)
        self.geo_origin = np.asarray(self.geo_origin, dtype=np.float64).reshape(3)
        if not np.isfinite(self.geo_origin).all():
            raise ValueError("geo_origin must be finite")
        if not self.crs_tag:
            raise ValueError("crs_tag must be non-empty")

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def subset(self, ids) -> "PointCloud":
        """Return the points at ``ids`` (index array or boolean mask), in that order."""
        ids = np.asarray(ids)
        return PointCloud(
            self.xyz[ids],
            self.rgb[ids],
            None if self.labels is None else self.labels[ids],
            self.geo_origin.copy(),
            self.crs_tag,
        )

    def with_labels(self, labels) -> "PointCloud":
        return PointCloud(self.xyz, self.rgb, labels, self.geo_origin, self.crs_tag)

    def with_xyz(self, xyz) -> "PointCloud":
        return PointCloud(xyz, self.rgb, self.labels, self.geo_origin, self.crs_tag)

    def require_points(self) -> None:
        if len(self) == 0:
            raise EmptyCloud("point cloud has no points")


def concat(clouds) -> PointCloud:
    """Stack clouds sharing one georeference. Labels survive only if all carry them."""
    clouds = list(clouds)
    if not clouds:
        raise EmptyCloud("nothing to concatenate")
    labels = None
    if all(c.labels is not None for c in clouds):
        labels = np.concatenate([c.labels for c in clouds])
    return PointCloud(
        np.concatenate([c.xyz for c in clouds]),
        np.concatenate([c.rgb for c in clouds]),
        labels,
        clouds[0].geo_origin,
        clouds[0].crs_tag,
    )


def as_ids(ids, n: int) -> np.ndarray:
    """Normalize an id collection (mask, list, set) to a sorted unique int array."""
    if isinstance(ids, (set, frozenset)):
        ids = sorted(ids)
    arr = np.asarray(ids)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError("boolean id mask has the wrong length")
        return np.flatnonzero(arr)
    arr = np.unique(arr.astype(np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise IndexError("point id out of range")
    return arr
