# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.sparse_core` module."""
import io

import numpy as np
import pytest

from spikevox.exceptions import (
    DataError,
    DuplicateCoordinate,
    FormatError,
    InvalidKernel,
    InvalidStride,
    OutOfBounds,
    ShapeMismatch,
    TruncatedFile,
)
from spikevox.selftest import random_sparse_tensor
from spikevox.sparse_core import (
    STRIDED,
    SUBMANIFOLD,
    VoxelCoord,
    build_rulebook,
    from_dense,
    kernel_offsets,
    load_svt,
    lookup,
    make_sparse_tensor,
    save_svt,
)


def test_make_sparse_tensor():
    tensor = make_sparse_tensor([(0, 1, 2, 3), (0, 4, 5, 6)], np.arange(8).reshape(2, 4), (8, 8, 8))

    assert tensor.num_active == 2
    assert tensor.channels == 4
    assert tensor.coord(1) == VoxelCoord(0, 4, 5, 6)
    assert tensor.index == {VoxelCoord(0, 1, 2, 3): 0, VoxelCoord(0, 4, 5, 6): 1}
    assert tensor.features.dtype == np.float32
    assert not tensor.features.flags.writeable


def test_make_sparse_tensor_without_batch_column():
    tensor = make_sparse_tensor([(1, 2, 3)], [[1.0]], (4, 4, 4))
    assert tensor.coord(0) == VoxelCoord(0, 1, 2, 3)


def test_make_sparse_tensor_duplicate():
    with pytest.raises(DuplicateCoordinate, match=r"\(0, 1, 1, 1\)"):
        make_sparse_tensor([(0, 1, 1, 1), (0, 1, 1, 1)], np.ones((2, 1)), (8, 8, 8))


def test_make_sparse_tensor_out_of_bounds():
    with pytest.raises(OutOfBounds, match=r"\(0, 9, 0, 0\)"):
        make_sparse_tensor([(0, 9, 0, 0)], np.ones((1, 1)), (8, 8, 8))


def test_make_sparse_tensor_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        make_sparse_tensor([(0, 1, 1, 1)], np.ones((2, 1)), (8, 8, 8))


def test_lookup(two_sites):
    assert lookup(two_sites, (0, 1, 0, 0)) == 1
    assert lookup(two_sites, (0, 2, 2, 0)) is None
    assert lookup(two_sites, (0, 5, 0, 0)) is None


def test_to_dense_and_from_dense(rng):
    tensor = random_sparse_tensor(rng, (4, 5, 6), 2, 0.3)
    dense = tensor.to_dense()

    assert dense.shape == (1, 4, 5, 6, 2)
    assert np.count_nonzero(np.any(dense != 0, axis=-1)) == np.count_nonzero(tensor.active_mask())

    back = from_dense(dense)
    active = tensor.active_mask()
    np.testing.assert_array_equal(np.sort(back.keys), np.sort(tensor.keys[active]))


def test_kernel_offsets():
    offsets = kernel_offsets((3, 3, 3))
    assert offsets.shape == (27, 3)
    np.testing.assert_array_equal(offsets[0], (-1, -1, -1))
    np.testing.assert_array_equal(offsets[13], (0, 0, 0))
    np.testing.assert_array_equal(kernel_offsets((2, 2, 2))[-1], (1, 1, 1))


def test_submanifold_rulebook(two_sites):
    rulebook = build_rulebook(two_sites, (3, 3, 1), 1, SUBMANIFOLD)

    np.testing.assert_array_equal(rulebook.out_coords, two_sites.coords)
    assert rulebook.num_pairs == 4
    assert sorted(map(tuple, rulebook.all_pairs()[:, 1:].tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_submanifold_rulebook_silent_input(two_sites):
    silent = two_sites.with_features(np.zeros((2, 1)))
    rulebook = build_rulebook(silent, (3, 3, 1), 1, SUBMANIFOLD)

    assert rulebook.num_outputs == 0
    assert rulebook.num_pairs == 0


def test_strided_rulebook_single_site():
    tensor = make_sparse_tensor([(0, 0, 0, 0)], [[1.0]], (4, 4, 4))
    rulebook = build_rulebook(tensor, (2, 2, 2), (2, 2, 2), STRIDED)

    np.testing.assert_array_equal(rulebook.out_coords, [(0, 0, 0, 0)])
    assert rulebook.num_pairs == 1
    assert rulebook.out_spatial_shape == (2, 2, 2)


def test_strided_rulebook_corners():
    corners = [(0, x, y, z) for x in (0, 3) for y in (0, 3) for z in (0, 3)]
    tensor = make_sparse_tensor(corners, np.ones((8, 1)), (4, 4, 4))
    rulebook = build_rulebook(tensor, 2, 2, STRIDED)

    assert rulebook.num_outputs == 8
    assert rulebook.num_pairs == 8


def test_strided_rulebook_one_cell():
    cell = [(0, x, y, z) for x in (2, 3) for y in (0, 1) for z in (0, 1)]
    tensor = make_sparse_tensor(cell, np.ones((8, 2)), (4, 4, 4))
    rulebook = build_rulebook(tensor, 2, 2, STRIDED)

    np.testing.assert_array_equal(rulebook.out_coords, [(0, 1, 0, 0)])
    np.testing.assert_array_equal(rulebook.pair_counts(), np.ones(8))


def test_strided_rulebook_empty_input():
    tensor = make_sparse_tensor(np.empty((0, 4)), np.empty((0, 1)), (4, 4, 4))
    rulebook = build_rulebook(tensor, 2, 2, STRIDED)

    assert rulebook.num_outputs == 0
    assert rulebook.num_pairs == 0


@pytest.mark.parametrize(
    "kernel, stride, mode, exception",
    (
        ((2, 3, 3), 1, SUBMANIFOLD, InvalidKernel),
        ((0, 3, 3), 1, STRIDED, InvalidKernel),
        (3, 2, SUBMANIFOLD, InvalidStride),
        (2, (0, 1, 1), STRIDED, InvalidStride),
    ),
)
def test_build_rulebook_invalid(two_sites, kernel, stride, mode, exception):
    with pytest.raises(exception):
        build_rulebook(two_sites, kernel, stride, mode)


def test_rulebook_pair_geometry(rng):
    """Every pair links an input at ``output * stride + offset`` within one offset, sorted by output row."""
    tensor = random_sparse_tensor(rng, (6, 6, 6), 2, 0.3)

    for kernel, stride, mode in ((3, 1, SUBMANIFOLD), (2, 2, STRIDED)):
        rulebook = build_rulebook(tensor, kernel, stride, mode)
        for offset, pairs in zip(rulebook.offsets, rulebook.pairs):
            inputs = tensor.coords[pairs[:, 0], 1:]
            outputs = rulebook.out_coords[pairs[:, 1], 1:]
            np.testing.assert_array_equal(inputs, outputs * np.array(rulebook.stride) + offset)
            assert np.all(np.diff(pairs[:, 1]) >= 0)
            assert len(set(map(tuple, pairs.tolist()))) == pairs.shape[0]


def test_submanifold_rulebook_matches_brute_force(rng):
    tensor = random_sparse_tensor(rng, (5, 5, 5), 2, 0.4)
    rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
    active = {tuple(coord) for coord, flag in zip(tensor.coords.tolist(), tensor.active_mask()) if flag}

    expected = 0
    for centre in active:
        for offset in kernel_offsets((3, 3, 3)).tolist():
            neighbour = (centre[0], *(c + o for c, o in zip(centre[1:], offset)))
            expected += neighbour in active

    assert rulebook.num_outputs == len(active)
    assert rulebook.num_pairs == expected


def test_rulebook_determinism(rng):
    tensor = random_sparse_tensor(rng, (6, 6, 6), 3, 0.3)
    first = build_rulebook(tensor, 3)
    second = build_rulebook(tensor, 3)

    for left, right in zip(first.pairs, second.pairs):
        np.testing.assert_array_equal(left, right)


def test_rulebook_matches(rng, two_sites):
    tensor = random_sparse_tensor(rng, (6, 6, 6), 1, 0.3)
    rulebook = build_rulebook(tensor, 3)

    assert rulebook.matches(tensor)
    assert rulebook.matches(tensor.with_features(np.zeros_like(tensor.features)))
    assert not rulebook.matches(two_sites)


def test_svt_file(tmp_path, rng):
    tensor = random_sparse_tensor(rng, (7, 5, 3), 4, 0.3)
    path = tmp_path / "tensor.svt"
    save_svt(tensor, path)
    loaded = load_svt(path)

    np.testing.assert_array_equal(loaded.coords, tensor.coords)
    np.testing.assert_array_equal(loaded.features, tensor.features)
    assert loaded.spatial_shape == (7, 5, 3)
    assert path.stat().st_size == 4 + 20 + tensor.num_active * (16 + 16)


def test_svt_errors(rng):
    buffer = io.BytesIO()
    save_svt(random_sparse_tensor(rng, (4, 4, 4), 2, 0.5), buffer)
    payload = buffer.getvalue()

    with pytest.raises(FormatError):
        load_svt(io.BytesIO(b"XXXX" + payload[4:]))

    with pytest.raises(TruncatedFile):
        load_svt(io.BytesIO(payload[:-3]))


def test_save_svt_missing_directory(tmp_path, rng):
    with pytest.raises(DataError, match="cannot write"):
        save_svt(random_sparse_tensor(rng, (4, 4, 4), 2, 0.5), tmp_path / "missing" / "voxels.svt")
