# -*- coding: utf-8 -*-
"""Spiking sparse backbone: spike voxel coding stem, downsample layers, basic blocks and the classification head.

Every timestep runs the same graph with shared weights::

    S0 = SVC(V)                                  svc_depth x (submanifold conv 3 -> I-LIF)
    U  = Down(S0) ; U = Block(U) ...             per stage: I-LIF -> strided conv 2/2, then the blocks
    logits = FC(mean_pool(I-LIF(U)))

A block computes the membrane shortcut ``U' = SSC(SN(U)) + U`` followed by ``U'' = SSC^m(SN^m(U'))``, which is the
block output. Submanifold convolutions return their output on the coordinates of their input, with zero potential at
centres that did not spike, so the shortcut addition is row aligned. Neuron states persist across timesteps within one
forward pass and start at zero for every sample. The forward pass records a tape that :meth:`Model.backward` replays
in reverse to backpropagate through time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, CoordMismatch, EmptyCloud, EmptyFeatures, FormatError, ShapeMismatch
from .neurons import NeuronParams, NeuronState, ilif_backward, ilif_step
from .profiler import measure_firing_rate
from .sparse_conv import ConvCounters, KernelWeights, rulebook_firing_rate, ssc_backward, ssc_forward
from .sparse_core import STRIDED, SUBMANIFOLD, Rulebook, SparseVoxelTensor, build_rulebook, write_payload

LOGGER = logging.getLogger(__name__)

NUM_STAGES = 4
SUBMANIFOLD_KERNEL = (3, 3, 3)
DOWNSAMPLE_KERNEL = (2, 2, 2)
DOWNSAMPLE_STRIDE = (2, 2, 2)

VARIANTS = {
    "T": {"blocks_per_stage": (1, 1, 1, 1), "channels_per_stage": (16, 32, 64, 128)},
    "S": {"blocks_per_stage": (1, 1, 1, 1), "channels_per_stage": (24, 48, 96, 160)},
    "B": {"blocks_per_stage": (2, 2, 2, 2), "channels_per_stage": (16, 32, 64, 128)},
    "L": {"blocks_per_stage": (2, 2, 2, 2), "channels_per_stage": (64, 128, 128, 256)},
}


@dataclass(frozen=True)
class NetworkSpec:
    """Declarative description of the network.

    ``timesteps`` is the number of timesteps ``T`` and ``d_max`` the maximum integer spike ``D``. ``svc_depth`` and
    ``block_depth`` are the number of consecutive convolution and neuron pairs in the coding stem and in the second
    half of each block. ``init_gain`` scales the fan-in uniform initialisation; ``stem_gain`` replaces it for the first
    coding convolution, whose inputs are real-valued voxel features instead of spikes.
    """

    variant: str = "T"
    blocks_per_stage: Tuple[int, ...] = (1, 1, 1, 1)
    channels_per_stage: Tuple[int, ...] = (16, 32, 64, 128)
    stem_channels: int = 16
    svc_depth: int = 2
    block_depth: int = 2
    timesteps: int = 1
    d_max: int = 4
    num_classes: int = 4
    in_channels: int = 3
    beta: float = 0.5
    init_gain: float = 3.0
    stem_gain: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "blocks_per_stage", tuple(int(v) for v in self.blocks_per_stage))
        object.__setattr__(self, "channels_per_stage", tuple(int(v) for v in self.channels_per_stage))

        if self.variant not in (*VARIANTS, "custom"):
            raise ConfigError(f"unknown variant `{self.variant}`, choose from {(*VARIANTS, 'custom')}")
        if len(self.blocks_per_stage) != NUM_STAGES or len(self.channels_per_stage) != NUM_STAGES:
            raise ConfigError(f"the backbone has {NUM_STAGES} stages, got {self.blocks_per_stage} blocks and "
                              f"{self.channels_per_stage} channels")
        if any(c < 1 for c in (*self.channels_per_stage, self.stem_channels, self.in_channels)):
            raise ConfigError("channel counts must be strictly positive")
        if any(b < 0 for b in self.blocks_per_stage):
            raise ConfigError(f"blocks per stage must not be negative, got {self.blocks_per_stage}")
        for name in ("svc_depth", "block_depth", "timesteps", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        NeuronParams(beta=self.beta, d_max=self.d_max)

    @classmethod
    def from_variant(cls, variant: str = "T", **overrides) -> "NetworkSpec":
        """Return the layout of an architecture variant, with ``stem_channels`` defaulting to the first stage width."""
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant `{variant}`, choose from {tuple(VARIANTS)}")

        values = {"variant": variant, **VARIANTS[variant]}
        values["stem_channels"] = values["channels_per_stage"][0]
        values.update(overrides)
        return cls(**values)

    @property
    def neuron_params(self) -> NeuronParams:
        return NeuronParams(beta=self.beta, d_max=self.d_max)


@dataclass(frozen=True)
class ParameterInfo:
    """Name, shape and kernel size (``None`` for the head) of one trainable array."""

    name: str
    shape: Tuple[int, ...]
    kernel_size: Optional[Tuple[int, int, int]] = None


def parameter_layout(spec: NetworkSpec) -> List[ParameterInfo]:
    """Return the trainable arrays of ``spec`` in checkpoint order."""
    volume = int(np.prod(SUBMANIFOLD_KERNEL))
    layout = []
    channels = spec.in_channels

    for index in range(spec.svc_depth):
        layout.append(
            ParameterInfo(f"svc.{index}.conv", (volume, channels, spec.stem_channels), SUBMANIFOLD_KERNEL)
        )
        channels = spec.stem_channels

    for stage, (blocks, width) in enumerate(zip(spec.blocks_per_stage, spec.channels_per_stage)):
        down = int(np.prod(DOWNSAMPLE_KERNEL))
        layout.append(ParameterInfo(f"stage{stage}.down", (down, channels, width), DOWNSAMPLE_KERNEL))
        channels = width
        for block in range(blocks):
            for conv in range(spec.block_depth + 1):
                name = f"stage{stage}.block{block}.conv{conv}"
                layout.append(ParameterInfo(name, (volume, width, width), SUBMANIFOLD_KERNEL))

    layout.append(ParameterInfo("head.weight", (channels, spec.num_classes)))
    layout.append(ParameterInfo("head.bias", (spec.num_classes,)))
    return layout


def count_parameters(spec: NetworkSpec) -> int:
    return int(sum(np.prod(info.shape) for info in parameter_layout(spec)))


def init_parameters(spec: NetworkSpec, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Initialise all arrays with fan-in scaled uniform weights and a zero head bias."""
    params = {}

    for info in parameter_layout(spec):
        if info.name == "head.bias":
            params[info.name] = np.zeros(info.shape, dtype=np.float32)
        elif info.name == "head.weight":
            bound = np.sqrt(3.0 / info.shape[0])
            params[info.name] = rng.uniform(-bound, bound, size=info.shape).astype(np.float32)
        else:
            gain = spec.stem_gain if info.name == "svc.0.conv" else spec.init_gain
            _, c_in, c_out = info.shape
            params[info.name] = KernelWeights.uniform(info.kernel_size, c_in, c_out, rng, gain).weights

    return params


@dataclass
class LayerRecord:
    """Activity of one layer at one timestep.

    For convolutions ``fr_binary`` and ``fr_integer`` describe the input entries gathered by the rulebook, ``pairs`` is
    the rulebook size and ``grid_volume`` the number of sites of the dense output grid. For neurons the rates describe
    the emitted spikes.
    """

    name: str
    kind: str
    timestep: int
    fr_binary: float
    fr_integer: float
    c_in: int = 0
    c_out: int = 0
    pairs: int = 0
    macs: float = 0
    acs: float = 0
    kernel_volume: int = 0
    grid_volume: int = 0
    sites: int = 0


@dataclass
class ForwardTrace:
    """Per-layer records of a forward pass, optionally with the retained output tensors."""

    records: List[LayerRecord] = field(default_factory=list)
    outputs: Dict[str, SparseVoxelTensor] = field(default_factory=dict)

    def firing_rates(self, kind: Optional[str] = None) -> Dict[str, float]:
        """Mean binary firing rate of each layer over timesteps."""
        rates = {}
        for record in self.records:
            if kind is None or record.kind == kind:
                rates.setdefault(record.name, []).append(record.fr_binary)
        return {name: float(np.mean(values)) for name, values in rates.items()}

    def rulebook_sizes(self) -> Dict[str, int]:
        """Total rulebook pairs of each convolution over timesteps."""
        sizes = {}
        for record in self.records:
            if record.kind in ("mac", "ac"):
                sizes[record.name] = sizes.get(record.name, 0) + record.pairs
        return sizes


@dataclass
class _Entry:
    op: str
    name: str
    inputs: Tuple[int, ...]
    output: int
    cache: dict


class _Step:
    """Executes the operations of one timestep and records them on a tape."""

    def __init__(
        self,
        timestep: int,
        params: NeuronParams,
        states: Dict[str, NeuronState],
        geometry: Dict[str, Rulebook],
        trace: Optional[ForwardTrace] = None,
        retain: bool = False,
    ):
        self.timestep = timestep
        self.params = params
        self.states = states
        self.geometry = geometry
        self.trace = trace
        self.retain = retain
        self.values: list = []
        self.entries: List[_Entry] = []

    def push(self, value) -> int:
        self.values.append(value)
        return len(self.values) - 1

    def _record(self, op: str, name: str, inputs: Tuple[int, ...], value, cache: dict) -> int:
        output = self.push(value)
        self.entries.append(_Entry(op, name, inputs, output, cache))
        if self.retain and isinstance(value, SparseVoxelTensor):
            self.trace.outputs[f"{name}@{self.timestep}"] = value
        return output

    def conv(self, name: str, source: int, kernel: KernelWeights, strided: bool = False, first: bool = False) -> int:
        tensor = self.values[source]

        if strided:
            rulebook = self.geometry.get(name)
            if rulebook is None or not rulebook.matches(tensor):
                rulebook = build_rulebook(tensor, DOWNSAMPLE_KERNEL, DOWNSAMPLE_STRIDE, STRIDED)
                self.geometry[name] = rulebook
            active_rows = None
        else:
            rulebook = build_rulebook(tensor, kernel.kernel_size, 1, SUBMANIFOLD)
            active_rows = np.flatnonzero(tensor.active_mask())

        counters = ConvCounters()
        output = ssc_forward(tensor, kernel, rulebook, counters)

        if active_rows is not None:
            aligned = np.zeros((tensor.num_active, kernel.c_out), dtype=np.float32)
            aligned[active_rows] = output.features
            output = tensor.with_features(aligned)

        if self.trace is not None:
            fr_binary, fr_integer = rulebook_firing_rate(tensor, rulebook)
            self.trace.records.append(
                LayerRecord(
                    name=name,
                    kind="mac" if first else "ac",
                    timestep=self.timestep,
                    fr_binary=fr_binary,
                    fr_integer=fr_integer,
                    c_in=kernel.c_in,
                    c_out=kernel.c_out,
                    pairs=rulebook.num_pairs,
                    macs=counters.macs,
                    acs=counters.acs,
                    kernel_volume=kernel.num_offsets,
                    grid_volume=int(np.prod(rulebook.out_spatial_shape)),
                    sites=output.num_active,
                )
            )

        cache = {"rulebook": rulebook, "kernel": kernel, "active_rows": active_rows}
        return self._record("conv", name, (source,), output, cache)

    def spike(self, name: str, source: int) -> int:
        tensor = self.values[source]
        state = self.states.get(name)

        if state is None or state.h_prev.shape != tensor.features.shape:
            state = NeuronState.zeros(tensor.features.shape)

        spikes, self.states[name], mask = ilif_step(state, tensor.features, self.params)
        output = tensor.with_features(spikes)

        if self.trace is not None:
            fr_binary, fr_integer = measure_firing_rate(output, self.params.d_max)
            self.trace.records.append(
                LayerRecord(name, "neuron", self.timestep, fr_binary, fr_integer, sites=output.num_active)
            )

        return self._record("spike", name, (source,), output, {"mask": mask})

    def add(self, name: str, first: int, second: int) -> int:
        left, right = self.values[first], self.values[second]

        if not left.same_coords(right):
            raise CoordMismatch(f"shortcut operands of `{name}` have different coordinates")

        return self._record("add", name, (first, second), left.with_features(left.features + right.features), {})

    def head(self, source: int, weight: np.ndarray, bias: np.ndarray) -> int:
        tensor = self.values[source]
        logits = classify_head(tensor, weight, bias, weight.shape[1])
        pooled = tensor.features.mean(axis=0)

        if self.trace is not None:
            fr_binary, fr_integer = measure_firing_rate(tensor, self.params.d_max)
            ops = weight.shape[0] * weight.shape[1]
            self.trace.records.append(
                LayerRecord(
                    name="head.fc",
                    kind="fc",
                    timestep=self.timestep,
                    fr_binary=fr_binary,
                    fr_integer=fr_integer,
                    c_in=weight.shape[0],
                    c_out=weight.shape[1],
                    pairs=1,
                    macs=ops,
                    acs=float(pooled.sum()) * weight.shape[1],
                    kernel_volume=1,
                    grid_volume=1,
                    sites=1,
                )
            )

        return self._record("head", "head", (source,), logits, {"pooled": pooled, "weight": weight})


def _svc(step: _Step, source: int, kernels: Sequence[KernelWeights], prefix: str = "svc") -> int:
    for index, kernel in enumerate(kernels):
        potential = step.conv(f"{prefix}.{index}.conv", source, kernel, first=index == 0)
        source = step.spike(f"{prefix}.{index}.sn", potential)
    return source


def _downsample(step: _Step, name: str, source: int, kernel: KernelWeights) -> int:
    spikes = step.spike(f"{name}.sn", source)
    return step.conv(name, spikes, kernel, strided=True)


def _block(step: _Step, name: str, source: int, kernels: Sequence[KernelWeights]) -> Tuple[int, int]:
    """Return the slots of the shortcut potential ``U'`` and of the block output ``U''``."""
    spikes = step.spike(f"{name}.sn0", source)
    shortcut = step.add(f"{name}.add", step.conv(f"{name}.conv0", spikes, kernels[0]), source)
    branch = shortcut

    for index, kernel in enumerate(kernels[1:], start=1):
        spikes = step.spike(f"{name}.sn{index}", branch)
        branch = step.conv(f"{name}.conv{index}", spikes, kernel)

    return shortcut, branch


def svc_encode(
    voxels: SparseVoxelTensor, spec: NetworkSpec, kernels: Sequence[KernelWeights]
) -> SparseVoxelTensor:
    """Encode real-valued voxel features into integer spikes with ``svc_depth`` convolution and I-LIF pairs.

    The spikes live on the coordinates of ``voxels``; sites that never received input carry zeros.
    """
    step = _Step(0, spec.neuron_params, {}, {})
    return step.values[_svc(step, step.push(voxels), kernels[: spec.svc_depth])]


def basic_block_forward(
    potential: SparseVoxelTensor, kernels: Sequence[KernelWeights], params: NeuronParams
) -> Tuple[SparseVoxelTensor, SparseVoxelTensor]:
    """Apply one basic block with zero initial neuron state and return ``(U', U'')``.

    ``kernels[0]`` feeds the membrane shortcut ``U' = conv0(SN(U)) + U``; the remaining kernels form the branch
    ``U''`` applied to ``U'``. The block output passed on to the next layer is ``U''``.
    """
    step = _Step(0, params, {}, {})
    shortcut, output = _block(step, "block", step.push(potential), kernels)
    return step.values[shortcut], step.values[output]


def downsample(potential: SparseVoxelTensor, kernel: KernelWeights, params: NeuronParams) -> SparseVoxelTensor:
    """Spike ``potential`` and apply the strided kernel 2, stride 2 sparse convolution."""
    step = _Step(0, params, {}, {})
    return step.values[_downsample(step, "down", step.push(potential), kernel)]


def classify_head(features: SparseVoxelTensor, weight: np.ndarray, bias: Optional[np.ndarray], num_classes: int):
    """Average pool the features over all sites and apply the fully connected layer.

    :raises EmptyFeatures: if ``features`` has no site.
    """
    if features.num_active == 0:
        raise EmptyFeatures("cannot pool a tensor without sites")

    weight = np.asarray(weight, dtype=np.float32)

    if weight.shape != (features.channels, num_classes):
        raise ShapeMismatch(f"head weight of shape {weight.shape} does not map {features.channels} to {num_classes}")

    logits = features.features.mean(axis=0) @ weight
    return logits if bias is None else logits + bias


@dataclass
class ForwardResult:
    """Logits averaged over timesteps, the per timestep logits, the trace and the tape for backpropagation."""

    logits: np.ndarray
    step_logits: List[np.ndarray]
    trace: ForwardTrace
    features: SparseVoxelTensor
    tape: List[_Step] = field(default_factory=list, repr=False)


class Model:
    """Backbone and classification head sharing their weights over ``spec.timesteps`` timesteps."""

    def __init__(self, spec: NetworkSpec, params: Dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        self.layout = {info.name: info for info in parameter_layout(spec)}

        missing = set(self.layout) - set(params)
        if missing:
            raise ShapeMismatch(f"parameters missing for {sorted(missing)}")

        for name, info in self.layout.items():
            if params[name].shape != info.shape:
                raise ShapeMismatch(f"parameter `{name}` has shape {params[name].shape}, expected {info.shape}")

    @classmethod
    def initialize(cls, spec: NetworkSpec, seed: int = 0) -> "Model":
        return cls(spec, init_parameters(spec, np.random.default_rng(seed)))

    def kernel(self, name: str) -> KernelWeights:
        return KernelWeights(self.params[name], self.layout[name].kernel_size)

    def _backbone_step(self, step: _Step, source: int) -> int:
        spec = self.spec
        source = _svc(step, source, [self.kernel(f"svc.{i}.conv") for i in range(spec.svc_depth)])

        for stage, blocks in enumerate(spec.blocks_per_stage):
            source = _downsample(step, f"stage{stage}.down", source, self.kernel(f"stage{stage}.down"))
            for block in range(blocks):
                name = f"stage{stage}.block{block}"
                kernels = [self.kernel(f"{name}.conv{conv}") for conv in range(spec.block_depth + 1)]
                _, source = _block(step, name, source, kernels)

        return source

    def _run(self, voxels: SparseVoxelTensor, with_head: bool, retain: bool) -> ForwardResult:
        if voxels.num_active == 0:
            raise EmptyCloud("the input tensor has no active voxel")

        if voxels.channels != self.spec.in_channels:
            raise ShapeMismatch(f"input has {voxels.channels} channels, the network expects {self.spec.in_channels}")

        trace = ForwardTrace()
        states: Dict[str, NeuronState] = {}
        geometry: Dict[str, Rulebook] = {}
        tape, step_logits = [], []
        features = None

        for timestep in range(self.spec.timesteps):
            step = _Step(timestep, self.spec.neuron_params, states, geometry, trace, retain)
            features = self._backbone_step(step, step.push(voxels))

            if with_head:
                spikes = step.spike("head.sn", features)
                step_logits.append(step.values[step.head(spikes, self.params["head.weight"], self.params["head.bias"])])

            features = step.values[features]
            if retain:
                tape.append(step)

        logits = np.mean(step_logits, axis=0) if step_logits else np.empty(0, dtype=np.float32)
        return ForwardResult(logits, step_logits, trace, features, tape)

    def forward(self, voxels: SparseVoxelTensor, retain: bool = False) -> ForwardResult:
        """Run all timesteps; with ``retain`` the tape for :meth:`backward` and all layer outputs are kept."""
        return self._run(voxels, with_head=True, retain=retain)

    def predict(self, voxels: SparseVoxelTensor) -> int:
        return int(np.argmax(self.forward(voxels).logits))

    def backward(self, result: ForwardResult, grad_logits: np.ndarray) -> Dict[str, np.ndarray]:
        """Backpropagate the gradient of the timestep averaged logits through all timesteps.

        Spikes pass gradients through the rectangular surrogate window; the neuron reset carries gradients from each
        timestep to the previous one.
        """
        if not result.tape:
            raise ValueError("the forward pass did not retain its tape, call `forward(..., retain=True)`")

        params = self.spec.neuron_params
        grads = {name: np.zeros_like(value) for name, value in self.params.items()}
        grad_step = np.asarray(grad_logits, dtype=np.float32) / len(result.tape)
        carry: Dict[str, np.ndarray] = {}

        for step in reversed(result.tape):
            pending = {step.entries[-1].output: grad_step}

            for entry in reversed(step.entries):
                grad = pending.pop(entry.output, None)
                inputs = self._backward_entry(entry, grad, step, grads, carry, params)

                for source, grad_input in zip(entry.inputs, inputs):
                    if grad_input is None:
                        continue
                    if source in pending:
                        pending[source] = pending[source] + grad_input
                    else:
                        pending[source] = grad_input

        return grads

    @staticmethod
    def _backward_entry(entry: _Entry, grad, step: _Step, grads, carry, params: NeuronParams):
        if entry.op == "spike":
            mask = entry.cache["mask"]
            grad_h = carry.get(entry.name)
            if grad is None and grad_h is None:
                return (None,)
            grad = np.zeros_like(mask) if grad is None else grad
            grad_h = np.zeros_like(mask) if grad_h is None else grad_h
            grad_u = ilif_backward(grad, grad_h, mask, params)
            carry[entry.name] = grad_u
            return (grad_u,)

        if grad is None:
            return (None,) * len(entry.inputs)

        if entry.op == "add":
            return grad, grad

        if entry.op == "conv":
            tensor = step.values[entry.inputs[0]]
            active_rows = entry.cache["active_rows"]
            grad_out = grad if active_rows is None else grad[active_rows]
            grad_input, grad_kernel = ssc_backward(grad_out, tensor, entry.cache["kernel"], entry.cache["rulebook"])
            grads[entry.name] += grad_kernel.weights
            return (grad_input,)

        if entry.op == "head":
            tensor = step.values[entry.inputs[0]]
            grads["head.weight"] += np.outer(entry.cache["pooled"], grad).astype(np.float32)
            grads["head.bias"] += grad.astype(np.float32)
            grad_pooled = entry.cache["weight"] @ grad
            grad_input = np.broadcast_to(grad_pooled / tensor.num_active, tensor.features.shape)
            return (np.ascontiguousarray(grad_input, dtype=np.float32),)

        raise ValueError(f"unknown operation `{entry.op}` on the tape")


def backbone_forward(
    voxels: SparseVoxelTensor, spec: NetworkSpec, params: Dict[str, np.ndarray]
) -> Tuple[SparseVoxelTensor, ForwardTrace]:
    """Run the backbone for all timesteps and return the features of the last timestep with the trace.

    :raises EmptyCloud: if ``voxels`` has no active site.
    """
    result = Model(spec, params)._run(voxels, with_head=False, retain=False)
    return result.features, result.trace


def save_checkpoint(path: Union[str, Path], spec: NetworkSpec, params: Dict[str, np.ndarray]) -> Path:
    """Write the weights to ``path`` in ``.swt`` format and the network spec next to it with suffix ``.cfg``."""
    from .config import dump_key_values, spec_to_mapping
    from .sparse_conv import save_swt

    path = Path(path)
    arrays = []

    for info in parameter_layout(spec):
        value = params[info.name]
        arrays.append(value.reshape((1,) * (3 - value.ndim) + value.shape))

    save_swt(arrays, path)
    write_payload(path.with_suffix(".cfg"), dump_key_values(spec_to_mapping(spec)).encode("utf-8"))
    LOGGER.info("wrote checkpoint with %d parameters to %s", count_parameters(spec), path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[NetworkSpec, Dict[str, np.ndarray]]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    :raises FormatError: if the weight file does not match the layout of its spec.
    """
    from .config import load_network_spec
    from .sparse_conv import load_swt

    path = Path(path)
    spec = load_network_spec(path.with_suffix(".cfg"))
    arrays = load_swt(path)
    layout = parameter_layout(spec)

    if len(arrays) != len(layout):
        raise FormatError(f"checkpoint has {len(arrays)} layers but the network needs {len(layout)}")

    params = {}
    for info, array in zip(layout, arrays):
        if array.size != int(np.prod(info.shape)):
            raise FormatError(f"layer `{info.name}` has {array.size} weights, expected shape {info.shape}")
        params[info.name] = array.reshape(info.shape).astype(np.float32)

    return spec, params
