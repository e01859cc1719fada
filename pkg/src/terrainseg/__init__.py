"""Rule-based semantic annotation, evaluation and ICP fusion of photogrammetric point clouds."""

__version__ = "0.1.0"
