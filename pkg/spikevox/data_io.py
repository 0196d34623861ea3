# -*- coding: utf-8 -*-
"""Read point clouds from ``.xyz`` text and ``.off`` meshes and assemble labelled datasets from manifests."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import (
    BadHeader,
    ConfigError,
    DataError,
    DegenerateMesh,
    IndexOutOfRange,
    MalformedRow,
    TruncatedFile,
)
from .sparse_core import SparseVoxelTensor, load_svt
from .voxelizer import PointCloud, VoxelConfig, voxelize

LOGGER = logging.getLogger(__name__)

NORMALIZED_RADIUS = 0.18
MANIFEST_COLUMNS = ("path", "label")

Source = Union[str, Path, TextIO]


def _lines(source: Source) -> Iterable[Tuple[int, str]]:
    """Yield ``(line_number, stripped_line)`` pairs, skipping blank lines and ``#`` comments."""
    if isinstance(source, Path):
        try:
            source = io.StringIO(source.read_text(encoding="utf-8"))
        except OSError as exception:
            raise DataError(f"cannot read `{source}`: {exception}") from exception
    elif isinstance(source, str):
        source = io.StringIO(source)

    for number, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield number, line


def parse_xyz(source: Source) -> PointCloud:
    """Parse rows of ``x y z`` or ``x y z intensity``.

    A string argument is the file content; pass a :class:`~pathlib.Path` to read a file.

    :raises MalformedRow: for a row that is not three or four numbers, carrying its line number.
    """
    points, intensity = [], []

    for number, line in _lines(source):
        tokens = line.replace(",", " ").split()
        try:
            values = [float(token) for token in tokens]
        except ValueError as exception:
            raise MalformedRow(number, line) from exception

        if len(values) not in (3, 4) or not np.all(np.isfinite(values)):
            raise MalformedRow(number, line)

        points.append(values[:3])
        intensity.append(values[3] if len(values) == 4 else np.nan)

    if not points:
        return PointCloud(np.empty((0, 3)))

    intensity = np.asarray(intensity)
    return PointCloud(np.asarray(points), None if np.all(np.isnan(intensity)) else np.nan_to_num(intensity))


def write_xyz(cloud: PointCloud, target: Union[str, Path, TextIO]) -> None:
    """Write ``cloud`` with full float precision so that parsing it back yields identical coordinates."""
    columns = [cloud.points] if cloud.intensity is None else [cloud.points, cloud.intensity[:, np.newaxis]]
    try:
        np.savetxt(target, np.hstack(columns), fmt="%.17g")
    except OSError as exception:
        raise DataError(f"cannot write `{target}`: {exception}") from exception


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices ``(V, 3)`` and triangular faces ``(F, 3)`` of vertex indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

        if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
            bad = faces[(faces < 0) | (faces >= vertices.shape[0])][0]
            raise IndexOutOfRange(f"face references vertex {bad} but the mesh has {vertices.shape[0]} vertices")

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def areas(self) -> np.ndarray:
        corners = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)


def parse_off(source: Source) -> TriangleMesh:
    """Parse an OFF mesh, splitting polygons into triangle fans.

    The counts may follow the ``OFF`` keyword on the header line. Tokens after the vertex indices of a face, such as
    colours, are ignored.

    :raises BadHeader: if the first line is not an OFF header or the counts are not integers.
    :raises TruncatedFile: if fewer vertex or face lines follow than announced.
    :raises IndexOutOfRange: if a face references a vertex that does not exist.
    """
    lines = iter(_lines(source))

    try:
        number, header = next(lines)
    except StopIteration as exception:
        raise BadHeader("empty file, expected an `OFF` header") from exception

    if not header.startswith("OFF"):
        raise BadHeader(f"line {number}: expected an `OFF` header, got `{header}`")

    counts = header[3:].split()

    try:
        if not counts:
            number, line = next(lines)
            counts = line.split()
        num_vertices, num_faces = int(counts[0]), int(counts[1])
    except StopIteration as exception:
        raise TruncatedFile("the file ends before the vertex and face counts") from exception
    except (ValueError, IndexError) as exception:
        raise BadHeader(f"line {number}: expected vertex and face counts, got `{' '.join(counts)}`") from exception

    vertices = np.empty((num_vertices, 3), dtype=np.float64)
    faces: List[List[int]] = []

    try:
        for index in range(num_vertices):
            number, line = next(lines)
            try:
                vertices[index] = [float(token) for token in line.split()[:3]]
            except ValueError as exception:
                raise MalformedRow(number, line) from exception

        for _ in range(num_faces):
            number, line = next(lines)
            tokens = line.split()
            try:
                size = int(tokens[0])
                polygon = [int(token) for token in tokens[1 : size + 1]]
            except (ValueError, IndexError) as exception:
                raise MalformedRow(number, line) from exception

            if size < 3 or len(polygon) != size:
                raise MalformedRow(number, line)

            for vertex in polygon:
                if not 0 <= vertex < num_vertices:
                    raise IndexOutOfRange(f"line {number}: face references vertex {vertex} of {num_vertices}")

            faces.extend([polygon[0], polygon[i], polygon[i + 1]] for i in range(1, size - 1))
    except StopIteration as exception:
        raise TruncatedFile(
            f"expected {num_vertices} vertices and {num_faces} faces, the file ends at line {number}"
        ) from exception

    return TriangleMesh(vertices, np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def normalize_mesh(mesh: TriangleMesh, radius: float = NORMALIZED_RADIUS) -> TriangleMesh:
    """Centre the vertices on their mean and scale them into a sphere of ``radius``.

    :raises DegenerateMesh: if all vertices coincide.
    """
    centred = mesh.vertices - mesh.vertices.mean(axis=0)
    extent = np.linalg.norm(centred, axis=1).max() if centred.size else 0.0

    if extent == 0:
        raise DegenerateMesh("all vertices of the mesh coincide")

    return TriangleMesh(centred * (radius / extent), mesh.faces)


def sample_surface(
    mesh: TriangleMesh, n: int, seed: int = 0, radius: Optional[float] = NORMALIZED_RADIUS
) -> PointCloud:
    """Sample ``n`` points uniformly over the mesh surface.

    Triangles are drawn with probability proportional to their area and points are placed with uniform barycentric
    coordinates. The mesh is first normalised into a sphere of ``radius``; pass ``None`` to keep its coordinates. The
    index of the source triangle of every point is stored under ``metadata["face"]``.

    :raises DegenerateMesh: if the total area is zero.
    """
    if n < 1:
        raise ConfigError(f"the number of samples must be at least 1, got {n}")

    areas = mesh.areas()
    total = float(areas.sum())

    if not total > 0:
        raise DegenerateMesh(f"the mesh with {mesh.num_faces} faces has zero surface area")

    if radius is not None:
        mesh = normalize_mesh(mesh, radius)

    rng = np.random.default_rng(seed)
    faces = rng.choice(mesh.num_faces, size=n, p=areas / total)
    first, second = rng.random(n), rng.random(n)
    root = np.sqrt(first)
    corners = mesh.vertices[mesh.faces[faces]]
    points = (
        (1 - root)[:, np.newaxis] * corners[:, 0]
        + (root * (1 - second))[:, np.newaxis] * corners[:, 1]
        + (root * second)[:, np.newaxis] * corners[:, 2]
    )
    return PointCloud(points, metadata={"face": faces})


def load_point_cloud(path: Union[str, Path], num_points: int = 1024, seed: int = 0) -> PointCloud:
    """Load an ``.xyz`` cloud or sample ``num_points`` points from an ``.off`` mesh."""
    path = Path(path)
    suffix = path.suffix.lower()

    if suffix == ".xyz":
        return parse_xyz(path)
    if suffix == ".off":
        return sample_surface(parse_off(path), num_points, seed)

    raise DataError(f"unsupported point cloud format `{suffix}` of `{path}`")


def load_voxels(
    path: Union[str, Path], config: VoxelConfig, num_points: int = 1024, seed: int = 0
) -> SparseVoxelTensor:
    """Load a sample as a sparse voxel tensor: ``.svt`` files directly, clouds and meshes through the voxelizer."""
    path = Path(path)

    if path.suffix.lower() == ".svt":
        return load_svt(path)

    return voxelize(load_point_cloud(path, num_points, seed), config)


def read_manifest(path: Union[str, Path]) -> pd.DataFrame:
    """Read a ``path,label`` CSV manifest; relative paths are resolved against the manifest directory.

    :raises BadHeader: if a column is missing.
    :raises MalformedRow: if a label is not an integer.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", skipinitialspace=True, dtype={"path": str})
    except OSError as exception:
        raise DataError(f"cannot read manifest `{path}`: {exception}") from exception
    except pd.errors.EmptyDataError as exception:
        raise BadHeader(f"manifest `{path}` is empty") from exception

    missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
    if missing:
        raise BadHeader(f"manifest `{path}` lacks the columns {missing}")

    labels = pd.to_numeric(frame["label"], errors="coerce")
    invalid = frame.index[labels.isna() | (labels != labels.round())]
    if len(invalid):
        row = int(invalid[0])
        raise MalformedRow(row + 2, f"{frame['path'].iloc[row]},{frame['label'].iloc[row]}")

    frame = frame.loc[:, list(MANIFEST_COLUMNS)].copy()
    frame["label"] = labels.astype(int)
    frame["path"] = [str(entry if Path(entry).is_absolute() else path.parent / entry) for entry in frame["path"]]
    return frame


def write_manifest(entries: Iterable[Tuple[Union[str, Path], int]], path: Union[str, Path]) -> Path:
    """Write ``(path, label)`` entries, storing paths relative to the manifest directory where possible."""
    path = Path(path)
    rows = []

    for entry, label in entries:
        entry = Path(entry)
        try:
            entry = entry.resolve().relative_to(path.parent.resolve())
        except ValueError:
            pass
        rows.append({"path": entry.as_posix(), "label": int(label)})

    try:
        pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS)).to_csv(path, index=False)
    except OSError as exception:
        raise DataError(f"cannot write manifest `{path}`: {exception}") from exception

    return path
