"""Rule-based roof extraction, roof-to-building expansion and three-class annotation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core.cloud import ClassLabel, PointCloud, as_ids
from .core.spatial import SpatialIndex, connected_components
from .errors import EmptyRoofSet
from .features import FeatureParams, FeatureSet, compute_features

log = logging.getLogger(__name__)

STAGES = ("blue", "verticality", "roughness", "density", "components")


class EmptyResultWarning(UserWarning):
    """A filter stage removed every remaining point."""


@dataclass(frozen=True)
class RuleConfig:
    blue_max: float = 60  # points with blue strictly below this are dropped
    verticality_max: float = 0.5
    roughness_max: float = 0.3
    density_min: int = 60
    density_radius: float = 3.0
    cc_link: float = 1.0
    cc_min_points: int = 100
    expand_radius_2d: float = 3.0

    def __post_init__(self):
        if min(self.density_radius, self.cc_link, self.expand_radius_2d) <= 0:
            raise ValueError("rule radii must be positive")
        if not 0 <= self.blue_max <= 255:
            raise ValueError("blue_max must lie in [0, 255]")
        if not 0 <= self.verticality_max <= 1 or not 0 <= self.roughness_max <= 1:
            raise ValueError("verticality_max and roughness_max must lie in [0, 1]")
        if self.density_min < 1 or self.cc_min_points < 1:
            raise ValueError("count thresholds must be >= 1")


@dataclass
class StageRecord:
    name: str
    n_in: int
    n_removed: int
    survivors: np.ndarray

    @property
    def n_out(self) -> int:
        return self.n_in - self.n_removed


@dataclass
class StageTrace:
    records: list = field(default_factory=list)
    empty_stage: str | None = None

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def telescopes(self, n_total: int | None = None) -> bool:
        prev = n_total
        for rec in self.records:
            if prev is not None and rec.n_in != prev:
                return False
            if rec.n_out != len(rec.survivors) or rec.n_removed < 0:
                return False
            prev = rec.n_out
        return True

    def report(self) -> str:
        lines = [f"{'stage':<12} {'in':>10} {'removed':>10} {'out':>10}"]
        for rec in self.records:
            lines.append(f"{rec.name:<12} {rec.n_in:>10d} {rec.n_removed:>10d} {rec.n_out:>10d}")
        return "\n".join(lines) + "\n"


def _check_stages(stages) -> tuple:
    stages = tuple(stages)
    if not stages or stages != STAGES[:len(stages)]:
        raise ValueError(f"stages must be a non-empty prefix of {STAGES}")
    return stages


def extract_roofs(non_ground: PointCloud, config: RuleConfig = RuleConfig(), stages=STAGES,
                  params: FeatureParams = FeatureParams()):
    """Run the roof filter chain over a non-ground cloud.

    Every stage sees only the survivors of the stage before it. Verticality and
    roughness come from one feature pass over the color-stage survivors;
    neighbor counts and components use the current survivors. Returns the surviving
    ids (indices into ``non_ground``) and the per-stage trace.
    """
    non_ground.require_points()
    stages = _check_stages(stages)
    trace = StageTrace()
    alive = np.arange(len(non_ground))
    feats = None

    for name in stages:
        n_in = len(alive)
        if n_in == 0:
            trace.records.append(StageRecord(name, 0, 0, alive))
            continue
        sub = non_ground.subset(alive)
        if name == "blue":
            keep = sub.rgb[:, 2] >= config.blue_max
        elif name == "verticality":
            feats = compute_features(sub, params)
            keep = feats.valid & (feats.verticality <= config.verticality_max)
        elif name == "roughness":
            # features stay those computed on the color-stage survivors
            keep = feats.valid & (feats.roughness <= config.roughness_max)
        elif name == "density":
            counts = SpatialIndex(sub).counts(config.density_radius, dims=3)
            keep = counts >= config.density_min
        else:
            _, surv = connected_components(sub, np.arange(n_in), config.cc_link, config.cc_min_points)
            keep = np.zeros(n_in, dtype=bool)
            keep[surv] = True
        if feats is not None:
            feats = FeatureSet(feats.verticality[keep], feats.roughness[keep],
                               feats.density[keep], feats.valid[keep])
        alive = alive[keep]
        trace.records.append(StageRecord(name, n_in, n_in - len(alive), alive))
        log.debug("stage %s: %d -> %d", name, n_in, len(alive))
        if len(alive) == 0 and trace.empty_stage is None:
            trace.empty_stage = name
            warnings.warn(f"roof extraction stage '{name}' removed all points", EmptyResultWarning,
                          stacklevel=2)
    return alive, trace


def expand_buildings(cloud: PointCloud, roof_ids, expand_radius_2d: float = 3.0) -> np.ndarray:
    """Roof points plus every point within ``expand_radius_2d`` (x, y only) of
    some roof point and strictly lower than it. Single pass, no chaining."""
    roof = as_ids(roof_ids, len(cloud))
    if roof.size == 0:
        raise EmptyRoofSet("no roof points to expand from")
    if expand_radius_2d <= 0:
        raise ValueError("expand_radius_2d must be positive")
    xy = cloud.xyz[:, :2]
    roof_z = cloud.xyz[roof, 2]
    pairs = cKDTree(xy).sparse_distance_matrix(cKDTree(xy[roof]), expand_radius_2d, output_type="ndarray")
    top = np.full(len(cloud), -np.inf)
    np.maximum.at(top, pairs["i"], roof_z[pairs["j"]])
    building = cloud.xyz[:, 2] < top
    building[roof] = True
    return np.flatnonzero(building)


@dataclass
class Annotation:
    cloud: PointCloud
    trace: StageTrace | None
    roof_ids: np.ndarray
    building_ids: np.ndarray
    warnings: list = field(default_factory=list)


def annotate(cloud: PointCloud, ground_ids, config: RuleConfig = RuleConfig(),
             params: FeatureParams = FeatureParams(), stages=STAGES) -> Annotation:
    """Label every point Ground, Building or Tree.

    ``ground_ids`` come from an upstream ground segmenter. Roofs are extracted
    from the remaining points and expanded to buildings; every other
    non-ground point is a tree.
    """
    cloud.require_points()
    ground = as_ids(ground_ids, len(cloud))
    labels = np.full(len(cloud), ClassLabel.TREE, dtype=np.uint8)
    labels[ground] = ClassLabel.GROUND
    non_ground = np.setdiff1d(np.arange(len(cloud)), ground, assume_unique=True)
    notes = []
    roof = building = np.zeros(0, dtype=np.int64)
    trace = None
    if non_ground.size:
        ng = cloud.subset(non_ground)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", EmptyResultWarning)
            local_roof, trace = extract_roofs(ng, config, stages, params)
        notes.extend(str(w.message) for w in caught if issubclass(w.category, EmptyResultWarning))
        if local_roof.size:
            local_building = expand_buildings(ng, local_roof, config.expand_radius_2d)
            roof, building = non_ground[local_roof], non_ground[local_building]
            labels[building] = ClassLabel.BUILDING
        else:
            notes.append("no roof points found; all non-ground points labeled tree")
            warnings.warn(notes[-1], EmptyResultWarning, stacklevel=2)
    return Annotation(cloud.with_labels(labels), trace, roof, building, notes)

