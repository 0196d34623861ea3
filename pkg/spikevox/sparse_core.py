# -*- coding: utf-8 -*-
"""Coordinate-indexed sparse voxel tensors and the rulebook that drives every sparse convolution.

A :class:`SparseVoxelTensor` stores the coordinates ``(batch, x, y, z)`` of its active sites as an integer array and the
per-site features as a ``float32`` matrix whose row ``i`` belongs to coordinate ``i``. Tensors and rulebooks are
immutable after construction: their arrays are flagged read-only and derived indices are cached.

A :class:`Rulebook` lists, for every kernel offset ``k``, the pairs ``(input_row, output_row)`` for which the input site
``output_site * stride + k`` is active. Sparse convolution then becomes gather, multiply and scatter over those pairs.
"""
from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    DuplicateCoordinate,
    FormatError,
    InvalidKernel,
    InvalidStride,
    OutOfBounds,
    ShapeMismatch,
    TruncatedFile,
)

LOGGER = logging.getLogger(__name__)

SUBMANIFOLD = "submanifold"
STRIDED = "strided"
MODES = (SUBMANIFOLD, STRIDED)

SVT_MAGIC = b"SVT1"
SVT_RECORD = np.dtype([("batch", "<u4"), ("xyz", "<i4", (3,))])

Triple = Tuple[int, int, int]


class VoxelCoord(NamedTuple):
    """Integer coordinate of a voxel: batch index followed by the three grid indices."""

    batch: int
    x: int
    y: int
    z: int


def as_triple(value: Union[int, Sequence[int]], name: str = "value") -> Triple:
    """Return ``value`` as a tuple of three integers, broadcasting a scalar."""
    if np.isscalar(value):
        return (int(value),) * 3

    triple = tuple(int(v) for v in value)

    if len(triple) != 3:
        raise ConfigError(f"{name} needs three components, got {value!r}")

    return triple


def linear_keys(coords: np.ndarray, spatial_shape: Triple) -> np.ndarray:
    """Return a unique ``int64`` key per ``(batch, x, y, z)`` row, ordered like the rows sorted lexicographically."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 4)
    size_x, size_y, size_z = (int(s) for s in spatial_shape)
    return ((coords[:, 0] * size_x + coords[:, 1]) * size_y + coords[:, 2]) * size_z + coords[:, 3]


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SparseVoxelTensor:
    """Active voxel coordinates with one feature row per coordinate.

    Use :func:`make_sparse_tensor` to construct instances; it validates the invariants.
    """

    coords: np.ndarray
    features: np.ndarray
    spatial_shape: Triple

    @classmethod
    def from_trusted(cls, coords: np.ndarray, features: np.ndarray, spatial_shape: Triple) -> "SparseVoxelTensor":
        """Wrap coordinates that come from an existing tensor or rulebook without validating them again."""
        return cls(_read_only(coords), _read_only(np.asarray(features, dtype=np.float32)), tuple(spatial_shape))

    @property
    def num_active(self) -> int:
        return self.coords.shape[0]

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    @property
    def batch_size(self) -> int:
        return int(self.coords[:, 0].max()) + 1 if self.num_active else 0

    @functools.cached_property
    def keys(self) -> np.ndarray:
        """Linear key of every row, see :func:`linear_keys`."""
        return _read_only(linear_keys(self.coords, self.spatial_shape))

    @functools.cached_property
    def _sorted(self) -> Tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.keys, kind="stable")
        return order, self.keys[order]

    @functools.cached_property
    def index(self) -> Dict[VoxelCoord, int]:
        """Map of every active coordinate to its row."""
        return {VoxelCoord(*map(int, coord)): row for row, coord in enumerate(self.coords)}

    def coord(self, row: int) -> VoxelCoord:
        return VoxelCoord(*map(int, self.coords[row]))

    def find_rows(self, keys: np.ndarray) -> np.ndarray:
        """Return the row of each key or ``-1`` where the key is not an active site."""
        keys = np.asarray(keys, dtype=np.int64)
        rows = np.full(keys.shape, -1, dtype=np.int64)

        if self.num_active == 0 or keys.size == 0:
            return rows

        order, sorted_keys = self._sorted
        position = np.minimum(np.searchsorted(sorted_keys, keys), sorted_keys.size - 1)
        found = sorted_keys[position] == keys
        rows[found] = order[position[found]]
        return rows

    def active_mask(self) -> np.ndarray:
        """Return whether each site carries at least one nonzero feature."""
        return np.any(self.features != 0, axis=1)

    def same_coords(self, other: "SparseVoxelTensor") -> bool:
        return (
            self.spatial_shape == other.spatial_shape
            and self.coords.shape == other.coords.shape
            and (self.coords is other.coords or np.array_equal(self.coords, other.coords))
        )

    def with_features(self, features: np.ndarray) -> "SparseVoxelTensor":
        """Return a tensor on the same coordinates with new feature rows."""
        features = np.asarray(features, dtype=np.float32)

        if features.ndim != 2 or features.shape[0] != self.num_active:
            raise ShapeMismatch(f"expected {self.num_active} feature rows, got array of shape {features.shape}")

        return SparseVoxelTensor(self.coords, _read_only(features), self.spatial_shape)

    def to_dense(self, batch_size: Optional[int] = None) -> np.ndarray:
        """Return the dense grid of shape ``(batch, X, Y, Z, channels)`` with zeros at inactive sites."""
        batch_size = self.batch_size if batch_size is None else batch_size
        dense = np.zeros((batch_size, *self.spatial_shape, self.channels), dtype=np.float32)
        batch, x, y, z = self.coords.T
        dense[batch, x, y, z] = self.features
        return dense


def make_sparse_tensor(coords, features, spatial_shape) -> SparseVoxelTensor:
    """Validate the inputs and return an immutable :class:`SparseVoxelTensor`.

    :param coords: array-like of shape ``(N, 4)`` with ``(batch, x, y, z)`` rows, or ``(N, 3)`` for batch ``0``.
    :param features: array-like of shape ``(N, C)``.
    :param spatial_shape: the grid extents ``(X, Y, Z)``.
    :raises ShapeMismatch: if the number of feature rows differs from the number of coordinates.
    :raises OutOfBounds: if a coordinate lies outside of ``spatial_shape``.
    :raises DuplicateCoordinate: if a coordinate occurs more than once.
    """
    spatial_shape = as_triple(spatial_shape, "spatial_shape")

    if any(extent < 1 for extent in spatial_shape):
        raise ConfigError(f"spatial shape must be positive, got {spatial_shape}")

    coords = np.asarray(coords, dtype=np.int64)

    if coords.size == 0:
        coords = coords.reshape(0, 4)
    elif coords.ndim == 2 and coords.shape[1] == 3:
        coords = np.concatenate([np.zeros((coords.shape[0], 1), dtype=np.int64), coords], axis=1)

    if coords.ndim != 2 or coords.shape[1] != 4:
        raise ShapeMismatch(f"coordinates must have shape (N, 4), got {coords.shape}")

    features = np.asarray(features, dtype=np.float32)

    if features.ndim != 2 or features.shape[0] != coords.shape[0]:
        raise ShapeMismatch(
            f"features of shape {features.shape} do not match {coords.shape[0]} coordinates"
        )

    upper = np.array((np.iinfo(np.int64).max, *spatial_shape))
    outside = np.any((coords < 0) | (coords >= upper), axis=1)

    if outside.any():
        row = int(np.flatnonzero(outside)[0])
        raise OutOfBounds(f"coordinate {tuple(coords[row])} at row {row} is outside of spatial shape {spatial_shape}")

    keys = linear_keys(coords, spatial_shape)
    unique, first, counts = np.unique(keys, return_index=True, return_counts=True)

    if unique.size != keys.size:
        row = int(first[np.flatnonzero(counts > 1)[0]])
        raise DuplicateCoordinate(f"coordinate {tuple(coords[row])} occurs more than once")

    return SparseVoxelTensor(_read_only(coords), _read_only(features), spatial_shape)


def empty_like(tensor: SparseVoxelTensor, channels: Optional[int] = None) -> SparseVoxelTensor:
    """Return a tensor without active sites on the grid of ``tensor``."""
    channels = tensor.channels if channels is None else channels
    return make_sparse_tensor(np.empty((0, 4)), np.empty((0, channels)), tensor.spatial_shape)


def from_dense(dense: np.ndarray) -> SparseVoxelTensor:
    """Return the sparse tensor of all sites with a nonzero feature in a ``(batch, X, Y, Z, C)`` grid."""
    dense = np.asarray(dense, dtype=np.float32)

    if dense.ndim == 4:
        dense = dense[np.newaxis]

    coords = np.argwhere(np.any(dense != 0, axis=-1))
    features = dense[tuple(coords.T)]
    return make_sparse_tensor(coords, features.reshape(-1, dense.shape[-1]), dense.shape[1:4])


def lookup(tensor: SparseVoxelTensor, coord: Sequence[int]) -> Optional[int]:
    """Return the row of ``coord`` if it is an active site of ``tensor`` and ``None`` otherwise."""
    return tensor.index.get(VoxelCoord(*map(int, coord)))


def kernel_offsets(kernel_size: Triple) -> np.ndarray:
    """Return the offsets of a kernel window, ``x`` varying slowest.

    Odd extents are centred, ``[-k // 2, k // 2]``; even extents start at the origin, ``[0, k - 1]``.
    """
    ranges = [range(-(k // 2), k // 2 + 1) if k % 2 else range(k) for k in kernel_size]
    return np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, 3)


def output_spatial_shape(spatial_shape: Triple, stride: Triple) -> Triple:
    """Return the grid extents after a strided convolution."""
    return tuple(-(-extent // step) for extent, step in zip(spatial_shape, stride))


@dataclass(frozen=True, eq=False)
class Rulebook:
    """Per kernel offset list of ``(input_row, output_row)`` pairs together with the output coordinates."""

    kernel_size: Triple
    stride: Triple
    mode: str
    offsets: np.ndarray
    pairs: Tuple[np.ndarray, ...]
    out_coords: np.ndarray
    out_spatial_shape: Triple
    source_keys: np.ndarray

    @property
    def num_offsets(self) -> int:
        return self.offsets.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.out_coords.shape[0]

    @property
    def num_pairs(self) -> int:
        """Total number of pairs over all offsets, the rulebook size of the FLOP count."""
        return int(sum(pairs.shape[0] for pairs in self.pairs))

    def pair_counts(self) -> np.ndarray:
        return np.array([pairs.shape[0] for pairs in self.pairs], dtype=np.int64)

    def all_pairs(self) -> np.ndarray:
        """Return ``(offset_index, input_row, output_row)`` rows of all pairs."""
        stacked = [
            np.column_stack([np.full(pairs.shape[0], index, dtype=np.int64), pairs])
            for index, pairs in enumerate(self.pairs)
        ]
        return np.concatenate(stacked) if stacked else np.empty((0, 3), dtype=np.int64)

    def matches(self, tensor: SparseVoxelTensor) -> bool:
        """Return whether ``tensor`` has the coordinates this rulebook was built from."""
        return self.source_keys.shape == tensor.keys.shape and np.array_equal(self.source_keys, tensor.keys)


def _sorted_pairs(input_rows: np.ndarray, output_rows: np.ndarray) -> np.ndarray:
    order = np.lexsort((input_rows, output_rows))
    pairs = np.column_stack([input_rows[order], output_rows[order]]).astype(np.int64)
    return _read_only(pairs.reshape(-1, 2))


def _submanifold_pairs(tensor: SparseVoxelTensor, offsets: np.ndarray):
    shape = np.array(tensor.spatial_shape)
    active_rows = np.flatnonzero(tensor.active_mask())
    centres = tensor.coords[active_rows]
    active = make_sparse_tensor(centres, np.zeros((centres.shape[0], 0)), tensor.spatial_shape)
    pairs = []

    for offset in offsets:
        neighbours = centres.copy()
        neighbours[:, 1:] += offset
        inside = np.all((neighbours[:, 1:] >= 0) & (neighbours[:, 1:] < shape), axis=1)
        rows = active.find_rows(linear_keys(neighbours[inside], tensor.spatial_shape))
        found = rows >= 0
        pairs.append(_sorted_pairs(active_rows[rows[found]], np.flatnonzero(inside)[found]))

    return pairs, centres, tensor.spatial_shape


def _strided_pairs(tensor: SparseVoxelTensor, offsets: np.ndarray, stride: Triple):
    out_shape = output_spatial_shape(tensor.spatial_shape, stride)
    step = np.array(stride)
    rows = np.arange(tensor.num_active)
    candidates = []

    for offset in offsets:
        shifted = tensor.coords[:, 1:] - offset
        valid = np.all((shifted >= 0) & (shifted % step == 0) & (shifted // step < np.array(out_shape)), axis=1)
        out = np.column_stack([tensor.coords[valid, 0], shifted[valid] // step])
        candidates.append((rows[valid], out.reshape(-1, 4)))

    stacked = np.concatenate([out for _, out in candidates])

    if stacked.shape[0] == 0:
        empty = np.empty(0, dtype=np.int64)
        return [_sorted_pairs(empty, empty) for _ in candidates], stacked, out_shape

    out_coords, inverse = np.unique(stacked, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    out_coords = out_coords.reshape(-1, 4)
    pairs = []
    start = 0

    for input_rows, out in candidates:
        stop = start + out.shape[0]
        pairs.append(_sorted_pairs(input_rows, inverse[start:stop]))
        start = stop

    return pairs, out_coords, out_shape


def build_rulebook(tensor: SparseVoxelTensor, kernel, stride=1, mode: str = SUBMANIFOLD) -> Rulebook:
    """Build the rulebook of a sparse convolution over ``tensor``.

    ``submanifold`` keeps exactly the sites that carry a nonzero feature as output centres and pairs every centre with
    the active sites inside its kernel window. ``strided`` maps every site of ``tensor`` to the output sites
    ``(coord - offset) / stride`` that are integral and inside the reduced grid; output coordinates are sorted.
    Within one offset, pairs are sorted by output row and then input row.

    :raises InvalidKernel: for a non-positive kernel or an even kernel in submanifold mode.
    :raises InvalidStride: for a non-positive stride or a stride other than one in submanifold mode.
    """
    kernel = as_triple(kernel, "kernel")
    stride = as_triple(stride, "stride")

    if any(k < 1 for k in kernel):
        raise InvalidKernel(f"kernel components must be at least 1, got {kernel}")

    if any(s < 1 for s in stride):
        raise InvalidStride(f"stride components must be at least 1, got {stride}")

    offsets = _read_only(kernel_offsets(kernel))

    if mode == SUBMANIFOLD:
        if any(k % 2 == 0 for k in kernel):
            raise InvalidKernel(f"submanifold convolution requires an odd kernel, got {kernel}")
        if stride != (1, 1, 1):
            raise InvalidStride(f"submanifold convolution requires stride (1, 1, 1), got {stride}")
        pairs, out_coords, out_shape = _submanifold_pairs(tensor, offsets)
    elif mode == STRIDED:
        pairs, out_coords, out_shape = _strided_pairs(tensor, offsets, stride)
    else:
        raise ConfigError(f"unknown convolution mode `{mode}`, choose from {MODES}")

    rulebook = Rulebook(
        kernel_size=kernel,
        stride=stride,
        mode=mode,
        offsets=offsets,
        pairs=tuple(pairs),
        out_coords=_read_only(np.asarray(out_coords, dtype=np.int64).reshape(-1, 4)),
        out_spatial_shape=tuple(out_shape),
        source_keys=tensor.keys,
    )
    LOGGER.debug(
        "built %s rulebook: %d inputs, %d outputs, %d pairs",
        mode,
        tensor.num_active,
        rulebook.num_outputs,
        rulebook.num_pairs,
    )
    return rulebook


def read_payload(source: Union[str, Path, BinaryIO]) -> bytes:
    """Return the bytes of a file path or of an open binary stream."""
    if not isinstance(source, (str, Path)):
        return source.read()

    try:
        return Path(source).read_bytes()
    except OSError as exception:
        raise DataError(f"cannot read `{source}`: {exception}") from exception


def write_payload(target: Union[str, Path, BinaryIO], payload: bytes) -> None:
    """Write ``payload`` to a file path or to an open binary stream."""
    if not isinstance(target, (str, Path)):
        target.write(payload)
        return

    try:
        Path(target).write_bytes(payload)
    except OSError as exception:
        raise DataError(f"cannot write `{target}`: {exception}") from exception


def save_svt(tensor: SparseVoxelTensor, target: Union[str, Path, BinaryIO]) -> None:
    """Write ``tensor`` in the little-endian ``.svt`` interchange format."""
    records = np.zeros(tensor.num_active, dtype=SVT_RECORD)
    records["batch"] = tensor.coords[:, 0]
    records["xyz"] = tensor.coords[:, 1:]
    header = np.array([tensor.num_active, tensor.channels, *tensor.spatial_shape], dtype="<u4")
    payload = SVT_MAGIC + header.tobytes() + records.tobytes() + tensor.features.astype("<f4").tobytes()
    write_payload(target, payload)


def load_svt(source: Union[str, Path, BinaryIO]) -> SparseVoxelTensor:
    """Read a tensor written by :func:`save_svt`.

    :raises FormatError: if the magic is wrong.
    :raises TruncatedFile: if the file is shorter than its header declares.
    """
    payload = read_payload(source)

    if payload[:4] != SVT_MAGIC:
        raise FormatError(f"not a sparse tensor file, magic is {payload[:4]!r}")

    if len(payload) < 24:
        raise TruncatedFile("sparse tensor file ends inside its header")

    num_active, channels, *spatial_shape = (int(v) for v in np.frombuffer(payload, dtype="<u4", count=5, offset=4))
    records_end = 24 + num_active * SVT_RECORD.itemsize
    features_end = records_end + num_active * channels * 4

    if len(payload) < features_end:
        raise TruncatedFile(f"sparse tensor file declares {num_active} sites but ends after {len(payload)} bytes")

    records = np.frombuffer(payload, dtype=SVT_RECORD, count=num_active, offset=24)
    features = np.frombuffer(payload, dtype="<f4", count=num_active * channels, offset=records_end)
    coords = np.column_stack([records["batch"].astype(np.int64), records["xyz"].astype(np.int64)])
    return make_sparse_tensor(coords, features.reshape(num_active, channels), spatial_shape)
