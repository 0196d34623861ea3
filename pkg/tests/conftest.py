# -*- coding: utf-8 -*-
"""Shared fixtures of the test suite."""
import numpy as np
import pytest

from spikevox.network import Model, NetworkSpec
from spikevox.selftest import random_sparse_tensor
from spikevox.sparse_core import make_sparse_tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_sites():
    """Two neighbouring unit spikes on a ``(3, 3, 1)`` grid."""
    return make_sparse_tensor([(0, 0, 0, 0), (0, 1, 0, 0)], np.ones((2, 1)), (3, 3, 1))


@pytest.fixture
def small_spec():
    return NetworkSpec(
        variant="custom",
        blocks_per_stage=(1, 1, 1, 1),
        channels_per_stage=(4, 4, 8, 8),
        stem_channels=4,
        num_classes=3,
        in_channels=3,
    )


@pytest.fixture
def small_model(small_spec):
    return Model.initialize(small_spec, seed=3)


@pytest.fixture
def voxels(rng):
    """Real valued input features on a ``16^3`` grid."""
    return random_sparse_tensor(rng, (16, 16, 16), 3, 0.05)
