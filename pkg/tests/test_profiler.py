# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.profiler` module."""
import numpy as np
import pytest

from spikevox.exceptions import ConfigError, MissingLayerStats, ValueOutOfRange
from spikevox.profiler import (
    EnergyModel,
    FiringStats,
    LayerStats,
    collect_firing_stats,
    estimate_ann_energy,
    estimate_dense_energy,
    estimate_energy,
    measure_firing_rate,
    profile_trace,
)


def test_measure_firing_rate():
    spikes = np.array([2, 2, 0, 0])
    assert measure_firing_rate(spikes, 4) == (0.5, 1.0)


def test_measure_firing_rate_empty():
    assert measure_firing_rate(np.empty((0, 3)), 4) == (0.0, 0.0)


@pytest.mark.parametrize("spikes", ([5], [-1]))
def test_measure_firing_rate_out_of_range(spikes):
    with pytest.raises(ValueOutOfRange):
        measure_firing_rate(np.array(spikes), 4)


def test_estimate_energy_mac():
    stats = FiringStats([LayerStats("stem", 1000, kind="mac")])
    assert estimate_energy(stats) == pytest.approx(4.6e-9)


def test_estimate_energy_ac():
    stats = FiringStats([LayerStats("conv", 1000, firing_rate=0.5)])
    assert estimate_energy(stats) == pytest.approx(0.45e-9)


def test_estimate_energy_integer_rate_and_timesteps():
    stats = FiringStats([LayerStats("conv", 1000, firing_rate=0.5, fr_integer=1.5)], timesteps=4)
    assert estimate_energy(stats) == pytest.approx(0.9e-12 * 4 * 1000 * 1.5)


def test_estimate_energy_custom_model():
    stats = FiringStats([LayerStats("stem", 10, kind="mac"), LayerStats("conv", 10, firing_rate=1.0)])
    assert estimate_energy(stats, EnergyModel(e_mac=2.0, e_ac=1.0)) == pytest.approx(30.0)


def test_estimate_energy_missing_layers():
    with pytest.raises(MissingLayerStats):
        estimate_energy(FiringStats([]))

    stats = FiringStats([LayerStats("conv", 10)], expected_layers=["conv", "down"])

    with pytest.raises(MissingLayerStats, match="down"):
        estimate_energy(stats)


def test_dense_and_ann_estimates():
    layers = [
        LayerStats("stem", 100, kind="mac", dense_flops=400),
        LayerStats("conv", 100, firing_rate=0.2, dense_flops=1000),
    ]
    stats = FiringStats(layers)
    model = EnergyModel(e_mac=1.0, e_ac=0.5)

    assert estimate_dense_energy(stats, model) == pytest.approx(400 + 0.5 * 1000 * 0.2)
    assert estimate_ann_energy(stats, model) == pytest.approx(200.0)


@pytest.mark.parametrize(
    "kwargs, exception",
    (
        ({"kind": "conv"}, ConfigError),
        ({"firing_rate": 1.5}, ValueOutOfRange),
        ({"fr_integer": -0.1}, ValueOutOfRange),
        ({"flops": -1.0}, ValueOutOfRange),
    ),
)
def test_layer_stats_invalid(kwargs, exception):
    with pytest.raises(exception):
        LayerStats(**{"name": "conv", "flops": 10.0, **kwargs})


def test_energy_model_invalid():
    with pytest.raises(ConfigError):
        EnergyModel(e_mac=0.0)


def test_firing_stats_layer():
    stats = FiringStats([LayerStats("conv", 10)])

    assert stats.layer("conv").flops == 10

    with pytest.raises(MissingLayerStats):
        stats.layer("down")


def test_collect_firing_stats_reproduces_accumulates(small_model, voxels):
    """The predicted accumulate count of every layer equals the count of the instrumented kernels."""
    result = small_model.forward(voxels)
    timesteps = small_model.spec.timesteps
    stats = collect_firing_stats(result.trace, timesteps, small_model.spec.d_max)
    acs = {}

    for record in result.trace.records:
        if record.kind == "ac":
            acs[record.name] = acs.get(record.name, 0) + record.acs

    for name, count in acs.items():
        layer = stats.layer(name)
        assert timesteps * layer.flops * layer.effective_rate == pytest.approx(count, rel=1e-9, abs=1e-9)

    assert "head.sn" in stats.neuron_rates
    assert stats.layer("svc.0.conv").kind == "mac"


def test_profile_trace(small_model, voxels):
    result = small_model.forward(voxels)
    report = profile_trace(result.trace, small_model.spec.timesteps, small_model.spec.d_max)

    assert report.spiking > 0
    assert report.spiking < report.ann
    assert report.spiking <= report.dense
    assert [row["layer"] for row in report.rows()] == [layer.name for layer in report.stats.layers]
    assert "svc.0.conv" in report.table()
    assert report.totals_mj()["spiking"] == pytest.approx(report.spiking * 1e3)
