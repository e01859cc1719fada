"""Point-cloud data model, file I/O, spatial indexing, voxels and rigid transforms."""

from .cloud import LABEL_NAMES, ClassLabel, PointCloud, as_ids, concat
from .io import FORMATS, PLY_ASCII, XYZRGB_TEXT, load_point_cloud, save_point_cloud
from .spatial import SpatialIndex, build_spatial_index, connected_components, radius_neighbors, workers
from .transform import RigidTransform, apply_transform, orthonormalize
from .voxel import VoxelGrid, voxel_subsample, voxelize

__all__ = [
    "ClassLabel", "LABEL_NAMES", "PointCloud", "as_ids", "concat",
    "FORMATS", "PLY_ASCII", "XYZRGB_TEXT", "load_point_cloud", "save_point_cloud",
    "SpatialIndex", "build_spatial_index", "connected_components", "radius_neighbors", "workers",
    "RigidTransform", "apply_transform", "orthonormalize",
    "VoxelGrid", "voxel_subsample", "voxelize",
]
