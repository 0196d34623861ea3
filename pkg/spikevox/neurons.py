# -*- coding: utf-8 -*-
"""Leaky integrate-and-fire neurons with binary and integer spikes.

The membrane follows the Euler-discretised recurrence

    U[t] = H[t - 1] + I[t]
    S[t] = fire(U[t])
    H[t] = beta * (U[t] - S[t])

where ``fire`` is the Heaviside step at the threshold for the binary LIF neuron and ``round(clip(U, 0, D))`` for the
integer LIF neuron. Training passes gradients through the integer neuron with a rectangular window over ``[0, D]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import ConfigError, ShapeMismatch, ValueOutOfRange

__all__ = (
    "NeuronParams",
    "NeuronState",
    "expand_virtual_timesteps",
    "ilif_backward",
    "ilif_forward",
    "ilif_step",
    "ilif_surrogate_mask",
    "lif_step",
)


@dataclass(frozen=True)
class NeuronParams:
    """Time constant ``beta``, firing threshold ``v_th`` and maximum integer spike ``d_max``."""

    beta: float = 0.5
    v_th: float = 1.0
    d_max: int = 4

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.v_th > 0:
            raise ConfigError(f"v_th must be positive, got {self.v_th}")
        if int(self.d_max) != self.d_max or self.d_max < 1:
            raise ConfigError(f"d_max must be an integer of at least 1, got {self.d_max}")


@dataclass(frozen=True)
class NeuronState:
    """Membrane potential after reset and leak, ``H[t - 1]``, one entry per site and channel."""

    h_prev: np.ndarray

    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> "NeuronState":
        return cls(np.zeros(shape, dtype=np.float32))


def _check_shapes(state: NeuronState, input_current: np.ndarray) -> np.ndarray:
    input_current = np.asarray(input_current, dtype=np.float32)

    if state.h_prev.shape != input_current.shape:
        raise ShapeMismatch(f"neuron state of shape {state.h_prev.shape} does not match input {input_current.shape}")

    return input_current


def lif_step(
    state: NeuronState, input_current: np.ndarray, params: NeuronParams
) -> Tuple[np.ndarray, NeuronState]:
    """Advance binary LIF neurons by one timestep; a potential exactly at the threshold fires."""
    input_current = _check_shapes(state, input_current)
    potential = state.h_prev + input_current
    spikes = (potential >= params.v_th).astype(np.float32)
    return spikes, NeuronState((params.beta * (potential - spikes)).astype(np.float32))


def ilif_forward(potential: np.ndarray, d_max: int) -> np.ndarray:
    """Return the integer spikes ``round(clip(U, 0, D))``, rounding halves away from zero."""
    clipped = np.clip(np.asarray(potential, dtype=np.float64), 0, d_max)
    return np.floor(clipped + 0.5).astype(np.int32)


def ilif_surrogate_mask(potential: np.ndarray, d_max: int) -> np.ndarray:
    """Return the rectangular surrogate window: one where ``0 <= U <= D`` and zero elsewhere."""
    potential = np.asarray(potential)
    return ((potential >= 0) & (potential <= d_max)).astype(np.float32)


def ilif_step(
    state: NeuronState, input_current: np.ndarray, params: NeuronParams
) -> Tuple[np.ndarray, NeuronState, np.ndarray]:
    """Advance integer LIF neurons by one timestep.

    :return: the integer spikes as ``float32``, the new state and the surrogate mask of the potential.
    """
    input_current = _check_shapes(state, input_current)
    potential = state.h_prev + input_current
    spikes = ilif_forward(potential, params.d_max).astype(np.float32)
    new_state = NeuronState((params.beta * (potential - spikes)).astype(np.float32))
    return spikes, new_state, ilif_surrogate_mask(potential, params.d_max)


def ilif_backward(
    grad_spikes: np.ndarray, grad_h: np.ndarray, mask: np.ndarray, params: NeuronParams
) -> np.ndarray:
    """Return the gradient of the potential of one I-LIF step.

    ``grad_h`` is the gradient arriving at the post-reset state ``H[t]`` from the next timestep; the reset
    ``H = beta * (U - S)`` routes it both directly into ``U`` and, negated, through the spike.
    """
    grad_spikes = grad_spikes - params.beta * grad_h
    return (params.beta * grad_h + grad_spikes * mask).astype(np.float32)


def expand_virtual_timesteps(spikes: np.ndarray, d_max: int) -> List[np.ndarray]:
    """Expand integer spikes into ``D`` binary planes, plane ``j`` firing where ``s >= j + 1``.

    :raises ValueOutOfRange: if an entry is not an integer in ``[0, D]``.
    """
    spikes = np.asarray(spikes)

    if spikes.size and (spikes.min() < 0 or spikes.max() > d_max or np.any(spikes != np.round(spikes))):
        raise ValueOutOfRange(f"integer spikes must lie in [0, {d_max}], got range [{spikes.min()}, {spikes.max()}]")

    return [(spikes >= level).astype(np.float32) for level in range(1, d_max + 1)]
