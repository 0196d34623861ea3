# -*- coding: utf-8 -*-
"""Clip point clouds to a box, bin them into voxels and assemble the per-voxel input features."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .exceptions import ConfigError, EmptyCloud, ShapeMismatch
from .sparse_core import SparseVoxelTensor, make_sparse_tensor

LOGGER = logging.getLogger(__name__)


class FeatureMode(str, enum.Enum):
    """Per-voxel input features."""

    OCCUPANCY = "occupancy"
    MEAN_OFFSET = "mean_offset"
    MEAN_INTENSITY = "mean_intensity"

    @property
    def channels(self) -> int:
        return {"occupancy": 1, "mean_offset": 3, "mean_intensity": 4}[self.value]


def _vector(value) -> np.ndarray:
    array = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
    return array.copy()


@dataclass(frozen=True)
class VoxelConfig:
    """Clip box ``[clip_min, clip_max)`` and voxel size in metres together with the feature mode."""

    clip_min: tuple = (-0.2, -0.2, -0.2)
    clip_max: tuple = (0.2, 0.2, 0.2)
    voxel_size: tuple = (0.01, 0.01, 0.01)
    feature_mode: FeatureMode = FeatureMode.MEAN_OFFSET

    def __post_init__(self):
        for name in ("clip_min", "clip_max", "voxel_size"):
            object.__setattr__(self, name, tuple(float(v) for v in _vector(getattr(self, name))))
        object.__setattr__(self, "feature_mode", FeatureMode(self.feature_mode))

        if not np.all(np.array(self.clip_max) > np.array(self.clip_min)):
            raise ConfigError(f"clip_max {self.clip_max} must exceed clip_min {self.clip_min} on every axis")
        if not np.all(np.array(self.voxel_size) > 0):
            raise ConfigError(f"voxel size must be positive, got {self.voxel_size}")

    @property
    def grid_shape(self) -> tuple:
        """Number of voxels along each axis, ``ceil((clip_max - clip_min) / voxel_size)``."""
        extent = (np.array(self.clip_max) - np.array(self.clip_min)) / np.array(self.voxel_size)
        return tuple(int(v) for v in np.ceil(np.round(extent, 9)))


VOXEL_PRESETS: Dict[str, VoxelConfig] = {
    "modelnet": VoxelConfig((-0.2, -0.2, -0.2), (0.2, 0.2, 0.2), (0.01, 0.01, 0.01)),
    "kitti": VoxelConfig((0.0, -40.0, -3.0), (70.4, 40.0, 1.0), (0.05, 0.05, 0.1), FeatureMode.MEAN_INTENSITY),
    "semantic_kitti": VoxelConfig((-51.2, -51.2, -4.0), (51.2, 51.2, 2.4), (0.1, 0.1, 0.1), FeatureMode.MEAN_INTENSITY),
    "nuscenes": VoxelConfig((-54.0, -54.0, -5.0), (54.0, 54.0, 3.0), (0.075, 0.075, 0.2), FeatureMode.MEAN_INTENSITY),
}


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in metres with optional per-point intensity and timestep index."""

    points: np.ndarray
    intensity: Optional[np.ndarray] = None
    timestep: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", points)

        for name in ("intensity", "timestep"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value).reshape(-1)
            if value.shape[0] != points.shape[0]:
                raise ShapeMismatch(f"{name} has {value.shape[0]} entries for {points.shape[0]} points")
            object.__setattr__(self, name, value)

        if not np.all(np.isfinite(points)):
            raise ShapeMismatch("point coordinates must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]

    def select(self, mask: np.ndarray) -> "PointCloud":
        """Return the cloud restricted to the points where ``mask`` is true."""
        return PointCloud(
            self.points[mask],
            None if self.intensity is None else self.intensity[mask],
            None if self.timestep is None else self.timestep[mask],
            dict(self.metadata),
        )


def clip_points(cloud: PointCloud, config: VoxelConfig) -> PointCloud:
    """Keep the points with ``clip_min <= p < clip_max`` on every axis."""
    inside = np.all((cloud.points >= config.clip_min) & (cloud.points < config.clip_max), axis=1)
    return cloud.select(inside)


def voxelize(
    cloud: PointCloud, config: VoxelConfig, batch: int = 0, timestep: Optional[int] = None
) -> SparseVoxelTensor:
    """Bin the clipped cloud into voxels ``floor((p - clip_min) / voxel_size)`` and average the features per voxel.

    Voxels are ordered by coordinate. With ``timestep`` only the points carrying that timestep index are binned.

    :raises EmptyCloud: if no voxel remains.
    """
    if timestep is not None and cloud.timestep is not None:
        cloud = cloud.select(cloud.timestep == timestep)

    cloud = clip_points(cloud, config)

    if len(cloud) == 0:
        raise EmptyCloud(f"no point of the cloud lies inside the clip box {config.clip_min} to {config.clip_max}")

    scaled = (cloud.points - np.array(config.clip_min)) / np.array(config.voxel_size)
    grid_shape = config.grid_shape
    indices = np.minimum(np.floor(scaled).astype(np.int64), np.array(grid_shape) - 1)
    voxels, inverse, counts = np.unique(indices, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    counts = counts.astype(np.float64)[:, np.newaxis]

    def mean(values: np.ndarray) -> np.ndarray:
        sums = np.zeros((voxels.shape[0], values.shape[1]), dtype=np.float64)
        np.add.at(sums, inverse, values)
        return sums / counts

    mode = config.feature_mode

    if mode is FeatureMode.OCCUPANCY:
        features = np.ones((voxels.shape[0], 1))
    else:
        features = np.clip(mean(scaled - indices - 0.5), -0.5, 0.5)
        if mode is FeatureMode.MEAN_INTENSITY:
            intensity = np.zeros(len(cloud)) if cloud.intensity is None else cloud.intensity.astype(np.float64)
            features = np.concatenate([features, mean(intensity[:, np.newaxis])], axis=1)

    coords = np.column_stack([np.full(voxels.shape[0], batch, dtype=np.int64), voxels])
    LOGGER.debug("voxelized %d points into %d voxels on grid %s", len(cloud), voxels.shape[0], grid_shape)
    return make_sparse_tensor(coords, features, grid_shape)
