# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.sparse_conv` module."""
import io

import numpy as np
import pytest

from spikevox.exceptions import (
    ChannelMismatch,
    FormatError,
    ShapeMismatch,
    StaleRulebook,
    TruncatedFile,
    ValueOutOfRange,
)
from spikevox.selftest import random_sparse_tensor
from spikevox.sparse_conv import (
    ConvCounters,
    KernelWeights,
    count_flops,
    count_flops_dense,
    load_swt,
    rulebook_firing_rate,
    save_swt,
    ssc_backward,
    ssc_forward,
    ssc_forward_accumulate,
    vsc_forward_dense,
)
from spikevox.sparse_core import STRIDED, build_rulebook, make_sparse_tensor


def test_identity_kernel(rng):
    tensor = random_sparse_tensor(rng, (5, 5, 5), 3, 0.3)
    rulebook = build_rulebook(tensor, 3)
    output = ssc_forward(tensor, KernelWeights.identity(3, 3), rulebook)

    np.testing.assert_array_equal(output.features, tensor.features[tensor.active_mask()])


def test_two_site_sum(two_sites):
    """With all-ones weights every centre sums itself and its active neighbour."""
    kernel = KernelWeights(np.ones((9, 1, 1)), (3, 3, 1))
    output = ssc_forward(two_sites, kernel, build_rulebook(two_sites, (3, 3, 1)))

    np.testing.assert_array_equal(output.features, [[2.0], [2.0]])


@pytest.mark.parametrize("seed", range(5))
def test_submanifold_matches_dense(seed):
    rng = np.random.default_rng(seed)
    tensor = random_sparse_tensor(rng, (6, 5, 4), 2, 0.3)
    kernel = KernelWeights.uniform(3, 2, 3, rng)
    rulebook = build_rulebook(tensor, 3)

    output = ssc_forward(tensor, kernel, rulebook)
    dense = vsc_forward_dense(tensor.to_dense(), kernel)
    _, x, y, z = rulebook.out_coords.T

    np.testing.assert_allclose(output.features, dense[0, x, y, z], rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("seed", range(5))
def test_strided_matches_dense(seed):
    rng = np.random.default_rng(seed)
    tensor = random_sparse_tensor(rng, (6, 6, 5), 2, 0.3)
    kernel = KernelWeights.uniform(2, 2, 4, rng)
    rulebook = build_rulebook(tensor, 2, 2, STRIDED)

    output = ssc_forward(tensor, kernel, rulebook)
    dense = vsc_forward_dense(tensor.to_dense(), kernel, stride=2)
    _, x, y, z = rulebook.out_coords.T

    np.testing.assert_allclose(output.features, dense[0, x, y, z], rtol=1e-5, atol=1e-5)


def test_bias(two_sites):
    kernel = KernelWeights(np.zeros((9, 1, 2)), (3, 3, 1), bias=[1.0, -1.0])
    output = ssc_forward(two_sites, kernel, build_rulebook(two_sites, (3, 3, 1)))

    np.testing.assert_array_equal(output.features, [[1.0, -1.0], [1.0, -1.0]])


def test_accumulate_matches_forward(rng):
    tensor = random_sparse_tensor(rng, (6, 6, 6), 3, 0.3, d_max=4)
    kernel = KernelWeights.uniform(3, 3, 5, rng)
    rulebook = build_rulebook(tensor, 3)
    mac_counters, ac_counters = ConvCounters(), ConvCounters()

    expected = ssc_forward(tensor, kernel, rulebook, mac_counters)
    actual = ssc_forward_accumulate(tensor, kernel, rulebook, 4, ac_counters)

    np.testing.assert_allclose(actual.features, expected.features, rtol=1e-5, atol=1e-5)
    assert ac_counters.acs == mac_counters.acs
    assert ac_counters.pairs == mac_counters.pairs == rulebook.num_pairs
    assert mac_counters.macs == rulebook.num_pairs * 3 * 5
    assert ac_counters.macs == 0


def test_accumulate_out_of_range(rng):
    tensor = random_sparse_tensor(rng, (4, 4, 4), 1, 0.5, d_max=4)
    kernel = KernelWeights.uniform(3, 1, 1, rng)

    with pytest.raises(ValueOutOfRange):
        ssc_forward_accumulate(tensor, kernel, build_rulebook(tensor, 3), 2)


def test_backward_adjoint(rng):
    """``<grad, conv(x)> == <x, grad_input>`` and the weight gradient matches ``<grad, conv_W(x)>``."""
    tensor = random_sparse_tensor(rng, (5, 5, 5), 2, 0.4)
    kernel = KernelWeights.uniform(3, 2, 3, rng)
    rulebook = build_rulebook(tensor, 3)
    output = ssc_forward(tensor, kernel, rulebook)
    grad = rng.normal(size=output.features.shape).astype(np.float32)

    grad_input, grad_kernel = ssc_backward(grad, tensor, kernel, rulebook)
    lhs = float(np.sum(grad.astype(np.float64) * output.features))

    np.testing.assert_allclose(np.sum(tensor.features.astype(np.float64) * grad_input), lhs, rtol=1e-4)
    np.testing.assert_allclose(np.sum(kernel.weights.astype(np.float64) * grad_kernel.weights), lhs, rtol=1e-4)


def test_backward_shape_mismatch(two_sites):
    kernel = KernelWeights.zeros((3, 3, 1), 1, 2)
    rulebook = build_rulebook(two_sites, (3, 3, 1))

    with pytest.raises(ShapeMismatch):
        ssc_backward(np.zeros((2, 3)), two_sites, kernel, rulebook)


def test_channel_mismatch(two_sites):
    with pytest.raises(ChannelMismatch):
        ssc_forward(two_sites, KernelWeights.zeros((3, 3, 1), 2, 1), build_rulebook(two_sites, (3, 3, 1)))


def test_stale_rulebook(two_sites):
    rulebook = build_rulebook(two_sites, (3, 3, 1))
    moved = make_sparse_tensor([(0, 0, 0, 0), (0, 2, 0, 0)], np.ones((2, 1)), (3, 3, 1))

    with pytest.raises(StaleRulebook):
        ssc_forward(moved, KernelWeights.zeros((3, 3, 1), 1, 1), rulebook)


def test_kernel_weights_shape():
    with pytest.raises(ShapeMismatch):
        KernelWeights(np.zeros((26, 1, 1)))


def test_count_flops(two_sites):
    rulebook = build_rulebook(two_sites, (3, 3, 1))

    assert count_flops(rulebook, 2, 3, 0.5) == 2.0 * 0.5 * 4 * 2 * 3
    assert count_flops_dense(10, 3, 2, 3, 1.0) == 2.0 * 10 * 27 * 2 * 3

    with pytest.raises(ValueOutOfRange):
        count_flops(rulebook, 2, 3, 1.5)


def test_rulebook_firing_rate():
    tensor = make_sparse_tensor([(0, 0, 0, 0), (0, 1, 0, 0)], [[2.0, 0.0], [1.0, 0.0]], (3, 3, 1))
    rulebook = build_rulebook(tensor, (3, 3, 1))

    assert rulebook_firing_rate(tensor, rulebook) == (0.5, 0.75)


def test_swt_file(tmp_path, rng):
    kernels = [KernelWeights.uniform(3, 2, 4, rng), rng.normal(size=(1, 4, 3))]
    path = tmp_path / "weights.swt"
    save_swt(kernels, path)
    loaded = load_swt(path)

    assert len(loaded) == 2
    np.testing.assert_array_equal(loaded[0], kernels[0].weights)
    np.testing.assert_array_equal(loaded[1], kernels[1].astype(np.float32))


def test_swt_errors(rng):
    buffer = io.BytesIO()
    save_swt([KernelWeights.uniform(3, 1, 2, rng)], buffer)
    payload = buffer.getvalue()

    with pytest.raises(FormatError):
        load_swt(io.BytesIO(b"SVT1" + payload[4:]))

    with pytest.raises(TruncatedFile):
        load_swt(io.BytesIO(payload[:-4]))

    with pytest.raises(FormatError):
        load_swt(io.BytesIO(payload + b"\x00\x00\x00\x00"))
