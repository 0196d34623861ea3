# -*- coding: utf-8 -*-
"""Vanilla and spike sparse convolution on top of the rulebook.

Weights of a convolution are stored per kernel offset as an array of shape ``(num_offsets, c_in, c_out)``; offset ``k``
is row ``k`` of :func:`spikevox.sparse_core.kernel_offsets`. All sparse kernels walk the rulebook offset by offset and
accumulate the pairs of one offset in their sorted order, which makes the result bit-reproducible.

The dense oracle :func:`vsc_forward_dense` computes the same cross-correlation ``U[p] = sum_k W[k] x[p + k]`` on
the full grid with ``scipy.ndimage`` and is used to verify the sparse kernels.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .exceptions import (
    ChannelMismatch,
    FormatError,
    NumericError,
    ShapeMismatch,
    StaleRulebook,
    TruncatedFile,
    ValueOutOfRange,
)
from .neurons import expand_virtual_timesteps
from .sparse_core import Rulebook, SparseVoxelTensor, Triple, as_triple, read_payload, write_payload

SWT_MAGIC = b"SWT1"


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Weights ``(num_offsets, c_in, c_out)`` of one convolution and an optional bias of length ``c_out``."""

    weights: np.ndarray
    kernel_size: Triple = (3, 3, 3)
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        kernel_size = as_triple(self.kernel_size, "kernel_size")
        object.__setattr__(self, "kernel_size", kernel_size)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float32))

        if self.weights.ndim != 3 or self.weights.shape[0] != int(np.prod(kernel_size)):
            raise ShapeMismatch(
                f"weights of shape {self.weights.shape} do not match kernel {kernel_size} with "
                f"{int(np.prod(kernel_size))} offsets"
            )

        if self.bias is not None:
            object.__setattr__(self, "bias", np.asarray(self.bias, dtype=np.float32).reshape(-1))
            if self.bias.shape != (self.c_out,):
                raise ShapeMismatch(f"bias of shape {self.bias.shape} does not match {self.c_out} output channels")

        if not np.all(np.isfinite(self.weights)):
            raise NumericError("kernel weights contain non-finite entries")

    @property
    def num_offsets(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def c_out(self) -> int:
        return self.weights.shape[2]

    @classmethod
    def zeros(cls, kernel_size, c_in: int, c_out: int) -> "KernelWeights":
        kernel_size = as_triple(kernel_size, "kernel_size")
        return cls(np.zeros((int(np.prod(kernel_size)), c_in, c_out), dtype=np.float32), kernel_size)

    @classmethod
    def identity(cls, kernel_size, channels: int) -> "KernelWeights":
        """Kernel whose centre offset is the identity matrix and all other offsets are zero."""
        kernel = cls.zeros(kernel_size, channels, channels)
        weights = kernel.weights.copy()
        weights[weights.shape[0] // 2] = np.eye(channels, dtype=np.float32)
        return cls(weights, kernel.kernel_size)

    @classmethod
    def uniform(cls, kernel_size, c_in: int, c_out: int, rng: np.random.Generator, gain: float = 1.0):
        """Fan-in scaled uniform initialisation with bound ``gain * sqrt(3 / (num_offsets * c_in))``."""
        kernel_size = as_triple(kernel_size, "kernel_size")
        num_offsets = int(np.prod(kernel_size))
        bound = gain * np.sqrt(3.0 / (num_offsets * c_in))
        weights = rng.uniform(-bound, bound, size=(num_offsets, c_in, c_out)).astype(np.float32)
        return cls(weights, kernel_size)


@dataclass
class ConvCounters:
    """Operation counts executed by the sparse kernels.

    ``macs`` counts multiplications of the matrix path. ``acs`` counts additions of weights under the virtual timestep
    expansion, one per unit of spike magnitude and output channel.
    """

    macs: int = 0
    acs: int = 0
    pairs: int = 0

    def add(self, other: "ConvCounters") -> None:
        self.macs += other.macs
        self.acs += other.acs
        self.pairs += other.pairs


def _validate(tensor: SparseVoxelTensor, kernel: KernelWeights, rulebook: Rulebook) -> None:
    if tensor.channels != kernel.c_in:
        raise ChannelMismatch(f"input has {tensor.channels} channels but the kernel expects {kernel.c_in}")

    if rulebook.kernel_size != kernel.kernel_size:
        raise ShapeMismatch(f"rulebook kernel {rulebook.kernel_size} differs from weights kernel {kernel.kernel_size}")

    if not rulebook.matches(tensor):
        raise StaleRulebook("the input coordinates changed since the rulebook was built")


def ssc_forward(
    tensor: SparseVoxelTensor,
    kernel: KernelWeights,
    rulebook: Rulebook,
    counters: Optional[ConvCounters] = None,
) -> SparseVoxelTensor:
    """Return the membrane potential ``U_p = sum_k W_k S_{p+k}`` at the output sites of ``rulebook``.

    :raises ChannelMismatch: if the input channels differ from the kernel.
    :raises StaleRulebook: if ``rulebook`` was built from other coordinates.
    """
    _validate(tensor, kernel, rulebook)
    output = np.zeros((rulebook.num_outputs, kernel.c_out), dtype=np.float32)

    for index, pairs in enumerate(rulebook.pairs):
        if not pairs.shape[0]:
            continue
        gathered = tensor.features[pairs[:, 0]]
        np.add.at(output, pairs[:, 1], gathered @ kernel.weights[index])

        if counters is not None:
            counters.macs += pairs.shape[0] * kernel.c_in * kernel.c_out
            counters.acs += int(round(float(np.abs(gathered).sum()))) * kernel.c_out
            counters.pairs += pairs.shape[0]

    if kernel.bias is not None and rulebook.num_outputs:
        output += kernel.bias

    return SparseVoxelTensor.from_trusted(rulebook.out_coords, output, rulebook.out_spatial_shape)


def ssc_forward_accumulate(
    tensor: SparseVoxelTensor,
    kernel: KernelWeights,
    rulebook: Rulebook,
    d_max: int,
    counters: Optional[ConvCounters] = None,
) -> SparseVoxelTensor:
    """Addition-only forward pass over integer spikes.

    The spikes are expanded into ``d_max`` binary planes; every unit spike adds the weight row of its input channel to
    its output site. No multiplication is executed.
    """
    _validate(tensor, kernel, rulebook)
    output = np.zeros((rulebook.num_outputs, kernel.c_out), dtype=np.float32)

    for plane in expand_virtual_timesteps(tensor.features, d_max):
        for index, pairs in enumerate(rulebook.pairs):
            fired, channel = np.nonzero(plane[pairs[:, 0]])
            np.add.at(output, pairs[fired, 1], kernel.weights[index][channel])

            if counters is not None:
                counters.acs += fired.size * kernel.c_out

    if counters is not None:
        counters.pairs += rulebook.num_pairs

    return SparseVoxelTensor.from_trusted(rulebook.out_coords, output, rulebook.out_spatial_shape)


def ssc_backward(
    grad_out: np.ndarray,
    tensor: SparseVoxelTensor,
    kernel: KernelWeights,
    rulebook: Rulebook,
) -> Tuple[np.ndarray, KernelWeights]:
    """Return the gradients of the input features and of the weights of :func:`ssc_forward`.

    :raises ShapeMismatch: if ``grad_out`` does not have one row per output site and one column per output channel.
    """
    _validate(tensor, kernel, rulebook)
    grad_out = np.asarray(grad_out, dtype=np.float32)

    if grad_out.shape != (rulebook.num_outputs, kernel.c_out):
        raise ShapeMismatch(
            f"output gradient of shape {grad_out.shape} does not match ({rulebook.num_outputs}, {kernel.c_out})"
        )

    grad_input = np.zeros_like(tensor.features, dtype=np.float32)
    grad_weights = np.zeros_like(kernel.weights)

    for index, pairs in enumerate(rulebook.pairs):
        if not pairs.shape[0]:
            continue
        upstream = grad_out[pairs[:, 1]]
        grad_weights[index] = tensor.features[pairs[:, 0]].T @ upstream
        np.add.at(grad_input, pairs[:, 0], upstream @ kernel.weights[index].T)

    grad_bias = grad_out.sum(axis=0) if kernel.bias is not None else None
    return grad_input, KernelWeights(grad_weights, kernel.kernel_size, grad_bias)


def vsc_forward_dense(dense: np.ndarray, kernel: KernelWeights, stride=1) -> np.ndarray:
    """Dense zero-padded cross-correlation over a ``(X, Y, Z, c_in)`` or ``(batch, X, Y, Z, c_in)`` grid.

    The result is sampled at every ``stride``-th site, so a strided output site ``o`` sees the inputs
    ``o * stride + k``.
    """
    dense = np.asarray(dense, dtype=np.float64)

    if dense.ndim == 5:
        return np.stack([vsc_forward_dense(grid, kernel, stride) for grid in dense])

    if dense.shape[-1] != kernel.c_in:
        raise ChannelMismatch(f"input has {dense.shape[-1]} channels but the kernel expects {kernel.c_in}")

    stride = as_triple(stride, "stride")
    origin = [0 if k % 2 else -(k // 2) for k in kernel.kernel_size]
    weights = kernel.weights.astype(np.float64)
    full = np.zeros((*dense.shape[:3], kernel.c_out), dtype=np.float64)

    for c_in in range(kernel.c_in):
        for c_out in range(kernel.c_out):
            window = weights[:, c_in, c_out].reshape(kernel.kernel_size)
            full[..., c_out] += ndimage.correlate(
                dense[..., c_in], window, mode="constant", cval=0.0, origin=origin
            )

    output = full[:: stride[0], :: stride[1], :: stride[2]]

    if kernel.bias is not None:
        output = output + kernel.bias

    return output.astype(np.float32)


def _check_rate(firing_rate: float) -> None:
    if not 0 <= firing_rate <= 1:
        raise ValueOutOfRange(f"firing rate must lie in [0, 1], got {firing_rate}")


def count_flops(rulebook: Rulebook, c_in: int, c_out: int, firing_rate: float) -> float:
    """FLOPs of a spike sparse convolution, ``2 * fr * N_r * c_in * c_out``."""
    _check_rate(firing_rate)
    return 2.0 * firing_rate * rulebook.num_pairs * c_in * c_out


def count_flops_dense(num_outputs: int, kernel_size, c_in: int, c_out: int, firing_rate: float) -> float:
    """FLOPs of a vanilla spike convolution over a full output grid, ``2 * fr * N * k^3 * c_in * c_out``."""
    _check_rate(firing_rate)
    kernel_size = as_triple(kernel_size, "kernel_size")
    return 2.0 * firing_rate * num_outputs * int(np.prod(kernel_size)) * c_in * c_out


def rulebook_firing_rate(tensor: SparseVoxelTensor, rulebook: Rulebook) -> Tuple[float, float]:
    """Activity of the feature entries the rulebook gathers, counted once per pair.

    :return: the fraction of nonzero entries and the mean entry magnitude.
    """
    rows = np.concatenate([pairs[:, 0] for pairs in rulebook.pairs])

    if rows.size == 0 or tensor.channels == 0:
        return 0.0, 0.0

    counts = np.bincount(rows, minlength=tensor.num_active).astype(np.float64)
    total = counts.sum() * tensor.channels
    nonzero = float(counts @ np.count_nonzero(tensor.features, axis=1))
    magnitude = float(counts @ np.abs(tensor.features).sum(axis=1, dtype=np.float64))
    return nonzero / total, magnitude / total


def save_swt(kernels: Sequence[Union[KernelWeights, np.ndarray]], target: Union[str, Path, BinaryIO]) -> None:
    """Write weight arrays of shape ``(num_offsets, c_in, c_out)`` in the ``.swt`` checkpoint format."""
    chunks = [SWT_MAGIC, np.array([len(kernels)], dtype="<u4").tobytes()]

    for kernel in kernels:
        weights = kernel.weights if isinstance(kernel, KernelWeights) else np.asarray(kernel)
        chunks.append(np.array(weights.shape, dtype="<u4").tobytes())
        chunks.append(weights.astype("<f4").tobytes())

    write_payload(target, b"".join(chunks))


def load_swt(source: Union[str, Path, BinaryIO]) -> List[np.ndarray]:
    """Read the weight arrays written by :func:`save_swt`.

    :raises FormatError: if the magic is wrong or bytes are left over.
    :raises TruncatedFile: if the file ends inside a layer.
    """
    payload = read_payload(source)

    if payload[:4] != SWT_MAGIC:
        raise FormatError(f"not a weight checkpoint, magic is {payload[:4]!r}")

    if len(payload) < 8:
        raise TruncatedFile("weight checkpoint ends inside its header")

    (num_layers,) = np.frombuffer(payload, dtype="<u4", count=1, offset=4)
    offset = 8
    layers = []

    for layer in range(int(num_layers)):
        if len(payload) < offset + 12:
            raise TruncatedFile(f"weight checkpoint ends inside the header of layer {layer}")
        shape = tuple(int(v) for v in np.frombuffer(payload, dtype="<u4", count=3, offset=offset))
        offset += 12
        count = int(np.prod(shape))
        if len(payload) < offset + 4 * count:
            raise TruncatedFile(f"weight checkpoint ends inside the weights of layer {layer}")
        layers.append(np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).copy())
        offset += 4 * count

    if offset != len(payload):
        raise FormatError(f"weight checkpoint has {len(payload) - offset} trailing bytes")

    return layers
