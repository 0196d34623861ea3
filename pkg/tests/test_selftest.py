# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.selftest` module."""
import numpy as np
import pytest

from spikevox.selftest import CHECKS, max_abs_error, random_sparse_tensor, run_check


@pytest.mark.parametrize(
    "name, instances",
    (
        ("oracle_equivalence", 10),
        ("strided_oracle", 10),
        ("adjoint", 5),
        ("finite_difference", 3),
        ("spike_linearity", 10),
        ("operation_audit", 10),
        ("energy_arithmetic", 5),
        ("identity_residual", 5),
    ),
)
def test_check_passes(name, instances):
    result = run_check(name, seed=11, instances=instances)

    assert result.passed, result.detail
    assert result.name == name
    assert result.seconds >= 0


@pytest.mark.parametrize("name", ("energy_ordering", "determinism"))
def test_network_check_passes(name):
    result = run_check(name, seed=0, instances=1)
    assert result.passed, result.detail


def test_run_check_reports_exceptions(monkeypatch):
    def broken(seed, instances=1):
        raise RuntimeError("kaput")

    monkeypatch.setitem(CHECKS, "broken", broken)
    result = run_check("broken")

    assert not result.passed
    assert result.detail == "RuntimeError: kaput"


def test_random_sparse_tensor(rng):
    tensor = random_sparse_tensor(rng, (5, 5, 5), 2, 0.2, d_max=3)

    assert tensor.num_active == 25
    assert tensor.features.min() >= 0
    assert tensor.features.max() <= 3
    np.testing.assert_array_equal(tensor.features, np.round(tensor.features))


def test_max_abs_error_is_not_scaled():
    """Large magnitudes do not loosen the tolerance: an error of ``2e-5`` on values near 100 still fails ``1e-5``."""
    error = max_abs_error(np.array([100.0, 1.0]), np.array([100.00002, 1.0]))

    assert error == pytest.approx(2e-5, rel=1e-6)
    assert error > 1e-5
    assert max_abs_error(np.empty((0, 2)), np.empty((0, 2))) == 0.0
