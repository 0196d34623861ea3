# -*- coding: utf-8 -*-
"""Firing rates, operation counts and the theoretical energy of a spiking forward pass.

The spiking estimate charges the coding convolution as multiply-accumulates and every later layer, including the
classifier, as accumulates scaled by its firing rate::

    E = E_MAC * FL_1 + E_AC * T * sum_n FL_n * fr_n

``FL_n`` is the number of synaptic operations of layer ``n`` per timestep, ``pairs * c_in * c_out`` for a sparse
convolution. Integer spikes of magnitude ``s`` count as ``s`` accumulates, so ``fr_n`` is the mean spike magnitude of
the gathered inputs. The same statistics also give the energy of the network run as dense spike convolution and of
the equivalent non-spiking network.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, MissingLayerStats, ValueOutOfRange

LOGGER = logging.getLogger(__name__)

MAC = "mac"
AC = "ac"
FC = "fc"


@dataclass(frozen=True)
class EnergyModel:
    """Energy in joules of one multiply-accumulate and one accumulate operation."""

    e_mac: float = 4.6e-12
    e_ac: float = 0.9e-12

    def __post_init__(self):
        if not (self.e_mac > 0 and self.e_ac > 0):
            raise ConfigError(f"operation energies must be positive, got e_mac={self.e_mac} e_ac={self.e_ac}")


@dataclass
class LayerStats:
    """Operation count ``flops`` per timestep and firing rate of one layer.

    ``firing_rate`` is the binary rate in ``[0, 1]``. ``fr_integer`` is the mean spike magnitude; when set it replaces
    the binary rate in the accumulate count.
    """

    name: str
    flops: float
    firing_rate: float = 1.0
    kind: str = AC
    fr_integer: Optional[float] = None
    pairs: int = 0
    c_in: int = 0
    c_out: int = 0
    dense_flops: float = 0.0

    def __post_init__(self):
        if self.kind not in (MAC, AC, FC):
            raise ConfigError(f"unknown layer kind `{self.kind}` for layer `{self.name}`")
        if min(self.flops, self.pairs, self.dense_flops) < 0:
            raise ValueOutOfRange(f"operation counts of layer `{self.name}` must not be negative")
        if not 0 <= self.firing_rate <= 1:
            raise ValueOutOfRange(f"firing rate of layer `{self.name}` must lie in [0, 1], got {self.firing_rate}")
        if self.fr_integer is not None and self.fr_integer < 0:
            raise ValueOutOfRange(f"integer firing rate of layer `{self.name}` must not be negative")

    @property
    def effective_rate(self) -> float:
        return self.firing_rate if self.fr_integer is None else self.fr_integer


@dataclass
class FiringStats:
    """Statistics of all layers of one forward pass with ``timesteps`` timesteps and maximum spike ``d_max``."""

    layers: List[LayerStats] = field(default_factory=list)
    timesteps: int = 1
    d_max: int = 4
    expected_layers: Optional[Sequence[str]] = None
    neuron_rates: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.timesteps < 1:
            raise ConfigError(f"timesteps must be at least 1, got {self.timesteps}")

    def layer(self, name: str) -> LayerStats:
        for stats in self.layers:
            if stats.name == name:
                return stats
        raise MissingLayerStats(f"no statistics recorded for layer `{name}`")


def measure_firing_rate(spikes, d_max: int) -> Tuple[float, float]:
    """Return the fraction of nonzero spike entries and the mean spike magnitude.

    ``spikes`` is a sparse tensor or a plain array of integer spikes.

    :raises ValueOutOfRange: if an entry lies outside ``[0, d_max]``.
    """
    values = np.asarray(getattr(spikes, "features", spikes))

    if values.size == 0:
        return 0.0, 0.0

    if values.min() < 0 or values.max() > d_max:
        raise ValueOutOfRange(f"spikes must lie in [0, {d_max}], got range [{values.min()}, {values.max()}]")

    return float(np.count_nonzero(values)) / values.size, float(values.mean(dtype=np.float64))


def _check_complete(stats: FiringStats) -> None:
    if not stats.layers:
        raise MissingLayerStats("no layer statistics to estimate the energy from")

    if stats.expected_layers is not None:
        missing = set(stats.expected_layers) - {layer.name for layer in stats.layers}
        if missing:
            raise MissingLayerStats(f"statistics missing for layers {sorted(missing)}")


def layer_energy(layer: LayerStats, timesteps: int, model: EnergyModel) -> float:
    """Energy in joules of one layer in the spiking estimate."""
    if layer.kind == MAC:
        return model.e_mac * layer.flops
    return model.e_ac * timesteps * layer.flops * layer.effective_rate


def estimate_energy(stats: FiringStats, model: Optional[EnergyModel] = None) -> float:
    """Return the inference energy of the spiking network in joules.

    :raises MissingLayerStats: if ``stats`` holds no layer or lacks one of its expected layers.
    """
    model = model or EnergyModel()
    _check_complete(stats)
    return float(sum(layer_energy(layer, stats.timesteps, model) for layer in stats.layers))


def estimate_dense_energy(stats: FiringStats, model: Optional[EnergyModel] = None) -> float:
    """Return the energy of the same layers run as dense spike convolutions over their full output grids."""
    model = model or EnergyModel()
    _check_complete(stats)
    total = 0.0

    for layer in stats.layers:
        dense = replace(layer, flops=layer.dense_flops or layer.flops)
        total += layer_energy(dense, stats.timesteps, model)

    return float(total)


def estimate_ann_energy(stats: FiringStats, model: Optional[EnergyModel] = None) -> float:
    """Return the energy of the equivalent non-spiking network: every operation is a multiply-accumulate."""
    model = model or EnergyModel()
    _check_complete(stats)
    return float(model.e_mac * sum(layer.flops for layer in stats.layers))


def collect_firing_stats(trace, timesteps: int, d_max: int) -> FiringStats:
    """Aggregate the per timestep records of a forward trace into one :class:`LayerStats` per layer.

    Operation counts are averaged over timesteps. The integer rate is derived from the instrumented accumulate count so
    that ``T * flops * fr_integer`` reproduces it exactly.
    """
    grouped: Dict[str, list] = {}
    neurons: Dict[str, list] = {}

    for record in trace.records:
        if record.kind == "neuron":
            neurons.setdefault(record.name, []).append((record.fr_binary, record.fr_integer))
        else:
            grouped.setdefault(record.name, []).append(record)

    layers = []
    for name, records in grouped.items():
        first = records[0]
        ops = float(np.mean([r.pairs for r in records])) * first.c_in * first.c_out
        acs = float(sum(r.acs for r in records))
        fr_binary = float(np.mean([r.fr_binary for r in records]))
        fr_integer = acs / (timesteps * ops) if ops else 0.0
        layers.append(
            LayerStats(
                name=name,
                flops=ops,
                firing_rate=min(max(fr_binary, 0.0), 1.0),
                kind=first.kind,
                fr_integer=fr_integer,
                pairs=int(round(np.mean([r.pairs for r in records]))),
                c_in=first.c_in,
                c_out=first.c_out,
                dense_flops=float(first.grid_volume * first.kernel_volume * first.c_in * first.c_out),
            )
        )

    rates = {name: tuple(np.mean(values, axis=0).tolist()) for name, values in neurons.items()}
    return FiringStats(layers, timesteps, d_max, [layer.name for layer in layers], rates)


@dataclass
class EnergyReport:
    """Per layer breakdown and totals of the three energy estimates."""

    stats: FiringStats
    model: EnergyModel
    spiking: float
    dense: float
    ann: float

    def rows(self) -> List[dict]:
        rows = []
        for layer in self.stats.layers:
            rows.append(
                {
                    "layer": layer.name,
                    "op": layer.kind,
                    "pairs": layer.pairs,
                    "fr_binary": round(layer.firing_rate, 4),
                    "fr_integer": round(layer.effective_rate, 4),
                    "flops": 2.0 * layer.firing_rate * layer.flops,
                    "energy_pj": layer_energy(layer, self.stats.timesteps, self.model) * 1e12,
                }
            )
        return rows

    def table(self, tablefmt: str = "simple") -> str:
        from tabulate import tabulate

        return tabulate(self.rows(), headers="keys", tablefmt=tablefmt, floatfmt=".4g")

    def totals_mj(self) -> Dict[str, float]:
        return {"spiking": self.spiking * 1e3, "dense": self.dense * 1e3, "ann": self.ann * 1e3}


def profile_trace(trace, timesteps: int, d_max: int, model: Optional[EnergyModel] = None) -> EnergyReport:
    """Build the energy report of a forward trace."""
    model = model or EnergyModel()
    stats = collect_firing_stats(trace, timesteps, d_max)
    report = EnergyReport(
        stats=stats,
        model=model,
        spiking=estimate_energy(stats, model),
        dense=estimate_dense_energy(stats, model),
        ann=estimate_ann_energy(stats, model),
    )
    LOGGER.debug("energy estimate over %d layers: %s mJ", len(stats.layers), report.totals_mj())
    return report
