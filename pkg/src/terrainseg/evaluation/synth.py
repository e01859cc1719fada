"""Seeded synthetic scenes with exact ground/building/tree truth labels."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..core.cloud import ClassLabel, PointCloud
from ..errors import SpecError

_MAX_TRIES = 2000


@dataclass(frozen=True)
class SceneSpec:
    extent: tuple = (150.0, 150.0)
    ground_noise: float = 0.1
    roof_noise: float = 0.05
    n_buildings: int = 3
    footprint_range: tuple = (12.0, 25.0)
    height_range: tuple = (6.0, 18.0)
    n_trees: int = 10
    crown_radius_range: tuple = (1.0, 1.5)
    crown_aspect_range: tuple = (1.0, 1.3)
    trunk_height_range: tuple = (2.0, 4.0)
    tree_jitter: float = 0.1
    tree_blue_leak: float = 0.03
    spacing: float = 0.5
    xy_jitter: float = 0.0  # ground and roof x-y offsets, as a fraction of spacing
    tree_spacing: float = 0.35
    clearance: float = 5.0
    bowl_depth: float = 0.0
    bowl_radius: float = 0.0  # 0 means the inscribed circle of the extent
    seed: int = 0

    def __post_init__(self):
        if self.spacing <= 0 or self.tree_spacing <= 0 or min(self.extent) <= 0:
            raise SpecError("spacing and extent must be positive")
        if self.n_buildings < 0 or self.n_trees < 0:
            raise SpecError("structure counts must be non-negative")
        for lo, hi in (self.footprint_range, self.height_range, self.crown_radius_range,
                       self.crown_aspect_range, self.trunk_height_range):
            if not 0 < lo <= hi:
                raise SpecError("ranges must satisfy 0 < low <= high")
        if not 0 <= self.xy_jitter <= 0.5:
            raise SpecError("xy_jitter must lie in [0, 0.5]")
        if self.bowl_radius < 0:
            raise SpecError("bowl_radius must be non-negative")
        if not 0 <= self.tree_jitter < 1 or not 0 <= self.tree_blue_leak <= 1:
            raise SpecError("tree_jitter must be in [0, 1) and tree_blue_leak in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise SpecError(f"unknown scene keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


def _grid(x0, x1, y0, y1, spacing):
    xs = np.linspace(x0, x1, max(2, int(round((x1 - x0) / spacing)) + 1))
    ys = np.linspace(y0, y1, max(2, int(round((y1 - y0) / spacing)) + 1))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def _perimeter(x0, x1, y0, y1, spacing):
    nx = max(1, int(round((x1 - x0) / spacing)))
    ny = max(1, int(round((y1 - y0) / spacing)))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    px = np.concatenate([xs[:-1], np.full(ny, x1), xs[::-1][:-1], np.full(ny, x0)])
    py = np.concatenate([np.full(nx, y0), ys[:-1], np.full(nx, y1), ys[::-1][:-1]])
    return px, py


def _jitter(x, y, spec, rng):
    if not spec.xy_jitter:
        return x, y
    a = spec.xy_jitter * spec.spacing
    return x + rng.uniform(-a, a, len(x)), y + rng.uniform(-a, a, len(y))


def _fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * k / n)
    theta = np.pi * (1 + 5 ** 0.5) * k
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def _place_buildings(spec, rng):
    W, H = spec.extent
    margin = spec.clearance
    boxes = []
    for _ in range(spec.n_buildings):
        for _ in range(_MAX_TRIES):
            w, d = rng.uniform(*spec.footprint_range, size=2)
            x0 = rng.uniform(margin, W - margin - w) if W - 2 * margin > w else None
            y0 = rng.uniform(margin, H - margin - d) if H - 2 * margin > d else None
            if x0 is None or y0 is None:
                continue
            box = (x0, x0 + w, y0, y0 + d)
            if all(box[0] > b[1] + 2 * margin or box[1] < b[0] - 2 * margin
                   or box[2] > b[3] + 2 * margin or box[3] < b[2] - 2 * margin for b in boxes):
                boxes.append(box)
                break
        else:
            raise SpecError("cannot place the requested buildings inside the extent")
    return boxes


def _box_distance(x, y, box):
    dx = max(box[0] - x, 0.0, x - box[1])
    dy = max(box[2] - y, 0.0, y - box[3])
    return float(np.hypot(dx, dy))


def _place_trees(spec, rng, boxes):
    W, H = spec.extent
    trees = []
    for _ in range(spec.n_trees):
        for _ in range(_MAX_TRIES):
            a = rng.uniform(*spec.crown_radius_range)
            reach = a * (1 + spec.tree_jitter)
            if W <= 2 * reach or H <= 2 * reach:
                continue
            cx = rng.uniform(reach, W - reach)
            cy = rng.uniform(reach, H - reach)
            if any(_box_distance(cx, cy, b) < reach + spec.clearance for b in boxes):
                continue
            if any(np.hypot(cx - t[0], cy - t[1]) < reach + t[2] * (1 + spec.tree_jitter) + 1.0
                   for t in trees):
                continue
            trees.append((cx, cy, a))
            break
        else:
            raise SpecError("cannot place the requested trees inside the extent")
    return trees


def generate_synthetic_scene(spec: SceneSpec = SceneSpec()):
    """Build a labeled scene: noisy ground, flat-roofed boxes, jittered tree crowns.

    Returns ``(cloud, truth)``; ``cloud.labels`` is left empty and ``truth``
    carries a ``ClassLabel`` code for every point.
    """
    rng = np.random.default_rng(spec.seed)
    W, H = spec.extent
    s = spec.spacing
    boxes = _place_buildings(spec, rng)
    trees = _place_trees(spec, rng, boxes)

    parts_xyz, parts_rgb, parts_lab = [], [], []

    gx, gy = _grid(0.0, W, 0.0, H, s)
    inside = np.zeros(len(gx), dtype=bool)
    for x0, x1, y0, y1 in boxes:
        inside |= (gx >= x0 - s / 2) & (gx <= x1 + s / 2) & (gy >= y0 - s / 2) & (gy <= y1 + s / 2)
    gx, gy = gx[~inside], gy[~inside]
    gx, gy = _jitter(gx, gy, spec, rng)
    gz = rng.uniform(-spec.ground_noise, spec.ground_noise, len(gx))
    base = rng.uniform(110, 150, size=(len(gx), 1))
    g_rgb = base + np.array([15.0, 5.0, -25.0]) + rng.uniform(-10, 10, (len(gx), 3))
    parts_xyz.append(np.stack([gx, gy, gz], axis=1))
    parts_rgb.append(g_rgb)
    parts_lab.append(np.full(len(gx), ClassLabel.GROUND))

    for x0, x1, y0, y1 in boxes:
        h = rng.uniform(*spec.height_range)
        rx, ry = _grid(x0, x1, y0, y1, s)
        rx, ry = _jitter(rx, ry, spec, rng)
        rx, ry = np.clip(rx, x0, x1), np.clip(ry, y0, y1)
        px, py = _perimeter(x0, x1, y0, y1, s)
        levels = np.arange(s, h - s / 2, s)
        wx, wy = np.tile(px, len(levels)), np.tile(py, len(levels))
        wz = np.repeat(levels, len(px))
        rz = h + rng.uniform(-spec.roof_noise, spec.roof_noise, len(rx))
        xyz = np.concatenate([np.stack([rx, ry, rz], axis=1),
                              np.stack([wx, wy, wz], axis=1)])
        gray = rng.uniform(100, 200)
        rgb = gray + rng.uniform(-15, 15, (len(xyz), 3))
        parts_xyz.append(xyz)
        parts_rgb.append(rgb)
        parts_lab.append(np.full(len(xyz), ClassLabel.BUILDING))

    for cx, cy, a in trees:
        c = a * rng.uniform(*spec.crown_aspect_range)
        trunk = rng.uniform(*spec.trunk_height_range)
        # Knud Thomsen approximation of the ellipsoid surface area
        p = 1.6075
        area = 4 * np.pi * (((a * a) ** p + 2 * (a * c) ** p) / 3) ** (1 / p)
        n = max(20, int(area / spec.tree_spacing ** 2))
        dirs = _fibonacci_sphere(n)
        radial = 1.0 + rng.uniform(-spec.tree_jitter, spec.tree_jitter, n)
        xyz = dirs * np.array([a, a, c]) * radial[:, None] + np.array([cx, cy, trunk + c])
        rgb = np.stack([rng.uniform(30, 110, n), rng.uniform(90, 190, n), rng.uniform(5, 55, n)], axis=1)
        leak = rng.random(n) < spec.tree_blue_leak
        rgb[leak, 2] = rng.uniform(60, 110, leak.sum())
        parts_xyz.append(xyz)
        parts_rgb.append(rgb)
        parts_lab.append(np.full(n, ClassLabel.TREE))

    xyz = np.concatenate(parts_xyz)
    rgb = np.clip(np.rint(np.concatenate(parts_rgb)), 0, 255).astype(np.uint8)
    truth = np.concatenate(parts_lab).astype(np.uint8)
    if spec.bowl_depth:
        xyz[:, 2] -= bowl_sag(xyz[:, 0], xyz[:, 1], spec)
    return PointCloud(xyz, rgb), truth


def bowl_sag(x, y, spec: SceneSpec):
    """Downward warp: ``bowl_depth`` at the scene center, fading to 0 at ``bowl_radius``."""
    W, H = spec.extent
    R = spec.bowl_radius or min(W, H) / 2
    r2 = ((np.asarray(x) - W / 2) ** 2 + (np.asarray(y) - H / 2) ** 2) / (R * R)
    return spec.bowl_depth * np.clip(1.0 - r2, 0.0, None)
