"""Segmentation metrics and synthetic ground-truth scenes."""

from .metrics import (
    CLASSES, HEADER, ClassMetrics, ConfusionMatrix, MetricsReport, aggregate_metrics,
    class_metrics, confusion_matrix, evaluate, f1_iou_from_pr, render_report, round_half_up,
)
from .synth import SceneSpec, bowl_sag, generate_synthetic_scene

__all__ = [
    "CLASSES", "HEADER", "ClassMetrics", "ConfusionMatrix", "MetricsReport", "aggregate_metrics",
    "class_metrics", "confusion_matrix", "evaluate", "f1_iou_from_pr", "render_report",
    "round_half_up", "SceneSpec", "bowl_sag", "generate_synthetic_scene",
]
