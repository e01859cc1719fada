"""Per-point geometric features: covariance eigen-structure, verticality, roughness, density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.cloud import PointCloud
from .core.spatial import SpatialIndex
from .errors import DegenerateNeighborhood, InsufficientNeighbors, NonUnitVector

UP = np.array([0.0, 0.0, 1.0])
# normalized second eigenvalue below this means the neighborhood is a line
COLLINEAR_TOL = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    lambdas: np.ndarray  # descending, scaled so lambdas[0] == 1
    evecs: np.ndarray  # columns e1, e2, e3
    raw_lambdas: np.ndarray
    centroid: np.ndarray

    @property
    def e3(self) -> np.ndarray:
        return self.evecs[:, 2]


@dataclass(frozen=True)
class FeatureParams:
    feature_radius: float = 1.5
    density_radius: float = 3.0
    min_neighbors: int = 8
    roughness_cap: float = 1.0

    def __post_init__(self):
        if self.feature_radius <= 0 or self.density_radius <= 0:
            raise ValueError("feature radii must be positive")
        if self.roughness_cap <= 0:
            raise ValueError("roughness_cap must be positive")
        if self.min_neighbors < 3:
            raise ValueError("min_neighbors must be at least 3")


@dataclass
class FeatureSet:
    """Per-point features; verticality and roughness are NaN where ``valid`` is False."""

    verticality: np.ndarray
    roughness: np.ndarray
    density: np.ndarray
    valid: np.ndarray

    def __len__(self) -> int:
        return len(self.valid)

    def dump_lines(self):
        for i, (v, r, d, ok) in enumerate(zip(self.verticality.tolist(), self.roughness.tolist(),
                                              self.density.tolist(), self.valid.tolist())):
            yield f"{i} {v!r} {r!r} {d} {int(ok)}\n"


def _sorted_eigh(cov: np.ndarray):
    w, v = np.linalg.eigh(cov)
    w = np.clip(w[..., ::-1], 0.0, None)
    return w, v[..., ::-1]


def covariance_eigen(neighbors) -> EigenDecomposition:
    """Eigen-decompose the (1/n) covariance of a neighborhood.

    Eigenvalues are sorted descending and divided by the largest one.
    """
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise InsufficientNeighbors(f"need at least 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    cov = q.T @ q / len(pts)
    w, v = _sorted_eigh(cov)
    if w[0] <= 0.0:
        raise DegenerateNeighborhood("all neighborhood points coincide")
    return EigenDecomposition(w / w[0], v, w, centroid)


def verticality(e3) -> float:
    e3 = np.asarray(e3, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(e3) - 1.0) > 1e-6:
        raise NonUnitVector("normal vector must have unit length")
    return float(np.clip(1.0 - abs(UP @ e3), 0.0, 1.0))


def roughness(neighbors, center, cap: float = 1.0) -> float:
    """Distance from ``center`` to the orthogonal least-squares plane of
    ``neighbors``, divided by ``cap`` and clipped to 1."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    eig = covariance_eigen(neighbors)
    if eig.lambdas[1] <= COLLINEAR_TOL:
        raise DegenerateNeighborhood("neighbors are collinear; plane is undefined")
    raw = abs((np.asarray(center, dtype=np.float64) - eig.centroid) @ eig.e3)
    return float(min(raw / cap, 1.0))


def density(index: SpatialIndex, point_id: int, r: float) -> int:
    return int(len(index.radius(int(point_id), r, dims=3)))


def neighborhood_moments(xyz: np.ndarray, pairs: np.ndarray):
    """Count, mean offset and covariance of each point's closed neighborhood.

    ``pairs`` are unordered neighbor pairs. Offsets are taken relative to the
    point itself, so large coordinate magnitudes do not cancel.
    """
    n = len(xyz)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    d = xyz[dst] - xyz[src]
    cnt = np.bincount(src, minlength=n).astype(np.float64) + 1.0  # + self at offset 0
    s1 = np.stack([np.bincount(src, weights=d[:, k], minlength=n) for k in range(3)], axis=1)
    s2 = np.empty((n, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            s2[:, a, b] = np.bincount(src, weights=d[:, a] * d[:, b], minlength=n)
            s2[:, b, a] = s2[:, a, b]
    mean = s1 / cnt[:, None]
    cov = s2 / cnt[:, None, None] - mean[:, :, None] * mean[:, None, :]
    return cnt - 1.0, mean, cov


def compute_features(cloud: PointCloud, params: FeatureParams = FeatureParams(),
                     index: SpatialIndex | None = None) -> FeatureSet:
    """Features for every point, using only the points of ``cloud``.

    The covariance neighborhood of a point is itself plus all points within
    ``feature_radius``; roughness is measured against the plane of that
    neighborhood. Density counts other points within ``density_radius``.
    """
    cloud.require_points()
    index = index if index is not None else SpatialIndex(cloud)
    xyz = index.xyz
    n = len(xyz)
    nbr, mean, cov = neighborhood_moments(xyz, index.pairs(params.feature_radius))
    valid = nbr >= params.min_neighbors

    vert = np.full(n, np.nan)
    rough = np.full(n, np.nan)
    if valid.any():
        _, vecs = _sorted_eigh(cov[valid])
        e3 = vecs[:, :, 2]
        vert[valid] = np.clip(1.0 - np.abs(e3[:, 2]), 0.0, 1.0)
        raw = np.abs(np.einsum("ij,ij->i", mean[valid], e3))
        rough[valid] = np.minimum(raw / params.roughness_cap, 1.0)
    dens = index.counts(params.density_radius, dims=3)
    return FeatureSet(vert, rough, dens, valid)
