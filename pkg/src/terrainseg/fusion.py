"""Georeferenced coarse alignment, two-pass ICP, ground-border refinement and overlap removal."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion
from scipy.spatial import cKDTree

from .core.cloud import ClassLabel, PointCloud
from .core.spatial import workers
from .core.transform import RigidTransform, apply_transform
from .core.voxel import voxel_subsample
from .errors import (
    CrsMismatch, DegenerateCorrespondences, EmptyBorder, MissingGeoreference,
    NoCorrespondences, TerrainSegError,
)
from .segment import GroundParams, extract_ground

log = logging.getLogger(__name__)


class FusionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    convergence_delta: float = 1e-6
    max_correspondence_dist: float = 10.0
    subsample_cell: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if min(self.convergence_delta, self.max_correspondence_dist, self.subsample_cell) <= 0:
            raise ValueError("ICP parameters must be positive")


@dataclass
class IcpStats:
    """``history`` holds the truncated RMS, sqrt(mean(min(d, max_dist)^2)),
    before the first update and after every iteration."""

    history: list
    inlier_rms: float
    inliers: int
    iterations: int
    converged: bool

    @property
    def rms(self) -> float:
        return self.history[-1]


def coarse_align(uav: PointCloud, bing: PointCloud) -> RigidTransform:
    """Translation taking UAV-local coordinates into the Bing-local frame."""
    for name, c in (("uav", uav), ("bing", bing)):
        if c.geo_origin is None or not c.crs_tag:
            raise MissingGeoreference(f"{name} cloud has no georeference")
    if uav.crs_tag != bing.crs_tag:
        raise CrsMismatch(f"frames differ: {uav.crs_tag!r} vs {bing.crs_tag!r}")
    return RigidTransform.from_translation(uav.geo_origin - bing.geo_origin)


def estimate_rigid_transform(source, target=None) -> RigidTransform:
    """Least-squares rotation and translation taking ``source`` rows onto
    ``target`` rows (SVD with reflection correction).

    With ``target`` omitted, ``source`` is a sequence of (source, target) point pairs.
    """
    if target is None:
        pairs = np.asarray(source, dtype=np.float64).reshape(-1, 2, 3)
        source, target = pairs[:, 0], pairs[:, 1]
    src = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise DegenerateCorrespondences("source and target sizes differ")
    if len(src) < 3:
        raise DegenerateCorrespondences("need at least 3 correspondences")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    a, b = src - mu_s, dst - mu_d
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateCorrespondences("correspondences are collinear")
    U, _, Vt = np.linalg.svd(a.T @ b)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, mu_d - R @ mu_s)


def _truncated_rms(dist, tau):
    return float(np.sqrt(np.mean(np.minimum(dist, tau) ** 2)))


def icp(source: PointCloud, target: PointCloud, init: RigidTransform | None = None,
        params: IcpParams = IcpParams()):
    """Point-to-point ICP with distance rejection.

    Both clouds are voxel-subsampled first. Returns the cumulative transform
    (including ``init``) mapping ``source`` onto ``target`` and an
    ``IcpStats``. The truncated RMS in ``stats.history`` never increases.
    """
    source.require_points()
    target.require_points()
    T = init if init is not None else RigidTransform.identity()
    src = voxel_subsample(source, params.subsample_cell).xyz
    tgt = voxel_subsample(target, params.subsample_cell).xyz
    tree = cKDTree(tgt)
    tau = params.max_correspondence_dist

    def match(T):
        cur = T.apply(src)
        d, j = tree.query(cur, distance_upper_bound=tau, workers=workers())
        return cur, d, j, np.isfinite(d)

    cur, d, j, inl = match(T)
    if not inl.any():
        raise NoCorrespondences(f"no target point within {tau} m of the source")
    history = [_truncated_rms(d, tau)]
    converged = False
    it = 0
    for it in range(1, params.max_iterations + 1):
        if inl.sum() < 3:
            warnings.warn("ICP stopped: fewer than 3 correspondences", FusionWarning, stacklevel=2)
            it -= 1
            break
        try:
            step = estimate_rigid_transform(cur[inl], tgt[j[inl]])
        except DegenerateCorrespondences as exc:
            warnings.warn(f"ICP stopped: {exc}", FusionWarning, stacklevel=2)
            it -= 1
            break
        T_new = step.compose(T)
        cur_n, d_n, j_n, inl_n = match(T_new)
        rms = _truncated_rms(d_n, tau)
        if rms > history[-1]:
            # floating-point noise only; keep the better estimate
            converged = rms - history[-1] < params.convergence_delta
            break
        T, cur, d, j, inl = T_new, cur_n, d_n, j_n, inl_n
        history.append(rms)
        if abs(history[-2] - rms) < params.convergence_delta:
            converged = True
            break
    inlier_rms = float(np.sqrt(np.mean(d[inl] ** 2))) if inl.any() else math.inf
    return T, IcpStats(history, inlier_rms, int(inl.sum()), it, converged)


@dataclass
class Footprint:
    """x-y occupancy raster. Cell ``(i, j)`` covers
    ``origin + [i, i+1) * cell`` by ``origin + [j, j+1) * cell``."""

    origin: np.ndarray
    cell: float
    offset: np.ndarray  # index of mask[0, 0]
    mask: np.ndarray

    def cell_index(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        return np.floor((xy - self.origin) / self.cell).astype(np.int64)

    def _lookup(self, mask, offset, xy) -> np.ndarray:
        ij = self.cell_index(xy) - offset
        ok = (ij >= 0).all(axis=1) & (ij[:, 0] < mask.shape[0]) & (ij[:, 1] < mask.shape[1])
        out = np.zeros(len(ij), dtype=bool)
        out[ok] = mask[ij[ok, 0], ij[ok, 1]]
        return out

    def contains(self, xy, dilate: int = 0) -> np.ndarray:
        if dilate <= 0:
            return self._lookup(self.mask, self.offset, xy)
        padded = np.pad(self.mask, dilate)
        grown = binary_dilation(padded, structure=np.ones((3, 3), bool), iterations=dilate)
        return self._lookup(grown, self.offset - dilate, xy)

    @property
    def boundary_mask(self) -> np.ndarray:
        padded = np.pad(self.mask, 1)
        inner = binary_erosion(padded, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool))
        return (padded & ~inner)[1:-1, 1:-1]

    def _cells(self, mask) -> set:
        return {(int(i), int(j)) for i, j in np.argwhere(mask) + self.offset}

    @property
    def occupied(self) -> set:
        return self._cells(self.mask)

    @property
    def boundary(self) -> set:
        return self._cells(self.boundary_mask)

    def border_distance(self, xy) -> np.ndarray:
        """x-y distance from each point to the nearest boundary cell (0 inside one)."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        cells = np.argwhere(self.boundary_mask) + self.offset
        lo = self.origin + cells * self.cell
        half = self.cell / 2
        centers = lo + half
        best = np.full(len(xy), np.inf)
        if len(centers) == 0 or len(xy) == 0:
            return best
        _, near = cKDTree(centers).query(xy, k=min(9, len(centers)), workers=workers())
        near = near.reshape(len(xy), -1)
        for k in range(near.shape[1]):
            gap = np.maximum(np.abs(xy - centers[near[:, k]]) - half, 0.0)
            best = np.minimum(best, np.hypot(gap[:, 0], gap[:, 1]))
        return best


def compute_footprint(cloud: PointCloud, cell: float = 5.0, origin=(0.0, 0.0)) -> Footprint:
    cloud.require_points()
    if cell <= 0:
        raise ValueError("cell must be positive")
    origin = np.asarray(origin, dtype=np.float64)
    ij = np.floor((cloud.xyz[:, :2] - origin) / cell).astype(np.int64)
    lo = ij.min(axis=0)
    shape = ij.max(axis=0) - lo + 1
    mask = np.zeros(tuple(shape), dtype=bool)
    mask[ij[:, 0] - lo[0], ij[:, 1] - lo[1]] = True
    return Footprint(origin, float(cell), lo, mask)


def crop_overlap(bing: PointCloud, fp: Footprint, buffer: float = 20.0) -> PointCloud:
    """Bing points over the footprint grown by ``ceil(buffer / cell)`` cells."""
    if buffer < 0:
        raise ValueError("buffer must be non-negative")
    keep = fp.contains(bing.xyz[:, :2], dilate=math.ceil(buffer / fp.cell))
    if not keep.any():
        warnings.warn("no Bing points inside the buffered footprint", FusionWarning, stacklevel=2)
    return bing.subset(keep)


def remove_overlap(bing: PointCloud, fp: Footprint) -> PointCloud:
    """Bing points outside the footprint's occupied cells."""
    return bing.subset(~fp.contains(bing.xyz[:, :2]))


def border_points(cloud: PointCloud, fp: Footprint, border_width: float) -> np.ndarray:
    return np.flatnonzero(fp.border_distance(cloud.xyz[:, :2]) <= border_width)


def _ground_pass(uav_ground, bing_ground, fp, border_width, params):
    uav_b = border_points(uav_ground, fp, border_width)
    bing_b = border_points(bing_ground, fp, border_width)
    if uav_b.size == 0 or bing_b.size == 0:
        raise EmptyBorder("no ground points near the footprint boundary")
    T, stats = icp(uav_ground.subset(uav_b), bing_ground.subset(bing_b), None, params)
    t = T.translation.copy()
    t[:2] = 0.0
    return RigidTransform(T.rotation, t), stats


def semantic_ground_register(uav_ground: PointCloud, bing_ground: PointCloud, fp: Footprint,
                             border_width: float = 15.0, params: IcpParams = IcpParams()) -> RigidTransform:
    """ICP between ground points near the footprint boundary; the returned
    transform keeps the rotation and z shift and has zero x/y translation."""
    uav_ground.require_points()
    bing_ground.require_points()
    return _ground_pass(uav_ground, bing_ground, fp, border_width, params)[0]


def border_gap(uav_ground: PointCloud, bing_ground: PointCloud, fp: Footprint,
               border_width: float) -> float:
    """Mean |dz| between UAV border ground points and the x-y nearest Bing ground point."""
    ids = border_points(uav_ground, fp, border_width)
    if ids.size == 0 or len(bing_ground) == 0:
        return math.nan
    pts = uav_ground.xyz[ids]
    _, j = cKDTree(bing_ground.xyz[:, :2]).query(pts[:, :2], workers=workers())
    return float(np.mean(np.abs(pts[:, 2] - bing_ground.xyz[j, 2])))


@dataclass(frozen=True)
class FusionConfig:
    buffer: float = 20.0
    footprint_cell: float = 5.0
    border_width: float = 15.0
    semantic: bool = True
    precrop_pass1: bool = False
    icp_pass1: IcpParams = IcpParams()
    icp_pass2: IcpParams = IcpParams(max_correspondence_dist=2.0)
    icp_ground: IcpParams = IcpParams(max_correspondence_dist=2.0)
    ground: GroundParams = GroundParams()

    def __post_init__(self):
        if self.buffer < 0 or self.footprint_cell <= 0 or self.border_width <= 0:
            raise ValueError("invalid fusion geometry parameters")


@dataclass
class FusionResult:
    transform: RigidTransform
    stages: dict
    trimmed_bing: PointCloud
    aligned_uav: PointCloud
    footprint: Footprint
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _ground_ids(cloud, ids, params):
    if ids is not None:
        return np.asarray(ids)
    if cloud.labels is not None and (cloud.labels == ClassLabel.GROUND).any():
        return np.flatnonzero(cloud.labels == ClassLabel.GROUND)
    return extract_ground(cloud, params)


def _delta(after: RigidTransform, before: RigidTransform) -> RigidTransform:
    return after.compose(before.inverse())


def fuse(uav: PointCloud, bing: PointCloud, uav_ground_ids=None, bing_ground_ids=None,
         config: FusionConfig = FusionConfig()) -> FusionResult:
    """Register a UAV cloud onto a Bing cloud and drop the overlapped Bing points.

    Stages: georeference translation, ICP against the whole Bing cloud, ICP
    against Bing cropped to the buffered UAV footprint, then (optionally) a
    ground-border pass whose x/y translation is zeroed. The result transform
    maps UAV-local coordinates into the Bing-local frame.
    """
    uav.require_points()
    bing.require_points()
    notes = []
    coarse = coarse_align(uav, bing)

    target1 = bing
    if config.precrop_pass1:
        fp0 = compute_footprint(apply_transform(uav, coarse), config.footprint_cell)
        target1 = crop_overlap(bing, fp0, config.buffer)
    T1, s1 = icp(uav, target1, coarse, config.icp_pass1)

    fp1 = compute_footprint(apply_transform(uav, T1), config.footprint_cell)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FusionWarning)
        cropped = crop_overlap(bing, fp1, config.buffer)
    if len(cropped) == 0:
        raise NoCorrespondences("Bing cloud does not overlap the UAV footprint")
    T2, s2 = icp(uav, cropped, T1, config.icp_pass2)

    stages = {"coarse": coarse, "pass1": _delta(T1, coarse), "pass2": _delta(T2, T1)}
    diag = {"pass1_rms": s1.inlier_rms, "pass2_rms": s2.inlier_rms,
            "pass1_iterations": s1.iterations, "pass2_iterations": s2.iterations}
    final = T2

    fp2 = compute_footprint(apply_transform(uav, T2), config.footprint_cell)
    uav_g = bing_g = None
    try:
        uav_g = apply_transform(uav.subset(_ground_ids(uav, uav_ground_ids, config.ground)), T2)
        bing_g = bing.subset(_ground_ids(bing, bing_ground_ids, config.ground))
        diag["border_gap_before"] = border_gap(uav_g, bing_g, fp2, config.border_width)
    except TerrainSegError as exc:
        notes.append(f"ground extraction failed: {exc}")
        diag["border_gap_before"] = math.nan

    if config.semantic:
        try:
            if uav_g is None or len(uav_g) == 0 or len(bing_g) == 0:
                raise EmptyBorder("no ground points available")
            Tg, sg = _ground_pass(uav_g, bing_g, fp2, config.border_width, config.icp_ground)
            stages["ground"] = Tg
            final = Tg.compose(T2)
            diag["ground_rms"] = sg.inlier_rms
            diag["border_gap_after"] = border_gap(apply_transform(uav_g, Tg), bing_g, fp2,
                                                  config.border_width)
        except TerrainSegError as exc:
            notes.append(f"semantic ground stage skipped: {exc}")
            warnings.warn(notes[-1], FusionWarning, stacklevel=2)
    if "border_gap_after" not in diag:
        diag["border_gap_after"] = diag["border_gap_before"]

    aligned = apply_transform(uav, final)
    aligned.geo_origin, aligned.crs_tag = bing.geo_origin.copy(), bing.crs_tag
    fp = compute_footprint(aligned, config.footprint_cell)
    trimmed = remove_overlap(bing, fp)
    diag["bing_points_removed"] = len(bing) - len(trimmed)
    return FusionResult(final, stages, trimmed, aligned, fp, diag, notes)
