"""Confusion-matrix metrics in the precision / recall / f1 / IOU table layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from ..core.cloud import LABEL_NAMES, ClassLabel
from ..errors import LengthMismatch

CLASSES = (ClassLabel.GROUND, ClassLabel.BUILDING, ClassLabel.TREE)
HEADER = ("precision", "recall", "f1-score", "IOU", "# points")


@dataclass
class ConfusionMatrix:
    """Counts indexed ``[truth, predicted]`` over ground, building, tree."""

    counts: np.ndarray
    excluded: int = 0
    classes: tuple = CLASSES

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    iou: float
    support: int
    undefined: bool = False

    def values(self):
        return (self.precision, self.recall, self.f1, self.iou)


@dataclass
class MetricsReport:
    per_class: list
    macro: ClassMetrics
    weighted: ClassMetrics
    excluded: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def row(m):
            return {"precision": m.precision, "recall": m.recall, "f1": m.f1, "iou": m.iou,
                    "points": m.support, "undefined": m.undefined}
        return {"classes": {m.name: row(m) for m in self.per_class},
                "macro avg": row(self.macro), "weighted avg": row(self.weighted),
                "excluded": self.excluded}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def confusion_matrix(pred, truth, classes=CLASSES) -> ConfusionMatrix:
    """Tally (truth, predicted) pairs. Points unlabeled in either sequence are
    left out and counted in ``excluded``."""
    pred = np.asarray(pred).astype(np.int64).ravel()
    truth = np.asarray(truth).astype(np.int64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} truth labels")
    codes = np.array([int(c) for c in classes])
    lut = np.full(max(codes.max(), pred.max(initial=0), truth.max(initial=0)) + 1, -1)
    lut[codes] = np.arange(len(codes))
    p, t = lut[pred], lut[truth]
    ok = (p >= 0) & (t >= 0)
    k = len(codes)
    counts = np.bincount(t[ok] * k + p[ok], minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, int((~ok).sum()), tuple(classes))


def _ratio(num, den) -> float:
    return float(num) / float(den) if den else 0.0


def f1_iou_from_pr(precision: float, recall: float):
    """F1 and IOU implied by one class's precision and recall."""
    if precision + recall == 0:
        return 0.0, 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return f1, f1 / (2 - f1)


def class_metrics(cm: ConfusionMatrix) -> list:
    """Per-class precision, recall, f1 and IOU. Zero denominators give 0."""
    c = cm.counts.astype(np.float64)
    out = []
    for k, cls in enumerate(cm.classes):
        tp = c[k, k]
        fp = c[:, k].sum() - tp
        fn = c[k, :].sum() - tp
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        f1 = _ratio(2 * tp, 2 * tp + fp + fn)
        iou = _ratio(tp, tp + fp + fn)
        out.append(ClassMetrics(LABEL_NAMES.get(cls, str(cls)), p, r, f1, iou, int(tp + fn),
                                undefined=bool(tp + fp + fn == 0)))
    return out


def aggregate_metrics(per_class, truth_counts=None):
    """Macro (plain mean) and weighted (by truth count) averages."""
    if not per_class:
        raise ValueError("need at least one class")
    counts = np.asarray([m.support for m in per_class] if truth_counts is None else truth_counts,
                        dtype=np.float64)
    vals = np.array([m.values() for m in per_class])
    total = int(counts.sum())
    macro = vals.mean(axis=0)
    weighted = (counts @ vals) / counts.sum() if counts.sum() > 0 else np.zeros(4)
    return (ClassMetrics("macro avg", *macro.tolist(), total),
            ClassMetrics("weighted avg", *weighted.tolist(), total))


def evaluate(pred, truth) -> MetricsReport:
    cm = confusion_matrix(pred, truth)
    per = class_metrics(cm)
    macro, weighted = aggregate_metrics(per)
    return MetricsReport(per, macro, weighted, cm.excluded)


def round_half_up(x: float, places: int = 3) -> Decimal:
    return Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def render_report(report: MetricsReport, title: str = "") -> str:
    name_w = max([12] + [len(m.name) for m in report.per_class])
    widths = (10, 10, 10, 8, 14)
    lines = []
    if title:
        lines.append(" " * name_w + " " + title)
    lines.append(" " * name_w + "".join(f"{h:>{w}}" for h, w in zip(HEADER, widths)))
    rows = list(report.per_class) + [report.macro, report.weighted]
    for m in rows:
        cells = [f"{round_half_up(v)}" for v in m.values()] + [f"{m.support:,}"]
        lines.append(f"{m.name:<{name_w}}" + "".join(f"{c:>{w}}" for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"
