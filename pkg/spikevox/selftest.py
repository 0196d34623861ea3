# -*- coding: utf-8 -*-
"""Property checks of the sparse kernels, neurons, network and energy model against independent references.

Every check takes a seed and an instance count and returns a :class:`CheckResult`. The references are the dense
convolution of :func:`~spikevox.sparse_conv.vsc_forward_dense`, transposition identities, finite differences and hand
computed energies.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .neurons import NeuronParams, ilif_backward, ilif_surrogate_mask
from .sparse_conv import (
    ConvCounters,
    KernelWeights,
    count_flops,
    rulebook_firing_rate,
    ssc_backward,
    ssc_forward,
    ssc_forward_accumulate,
    vsc_forward_dense,
)
from .sparse_core import STRIDED, SUBMANIFOLD, SparseVoxelTensor, build_rulebook, make_sparse_tensor

LOGGER = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_sparse_tensor(
    rng: np.random.Generator,
    spatial_shape: Tuple[int, int, int],
    channels: int,
    density: float,
    d_max: Optional[int] = None,
) -> SparseVoxelTensor:
    """Return a tensor with about ``density`` of the grid present.

    With ``d_max`` the features are integer spikes in ``[0, d_max]``, otherwise standard normal values. A quarter of
    the rows is zeroed so that present but silent sites occur.
    """
    volume = int(np.prod(spatial_shape))
    count = max(1, int(round(density * volume)))
    cells = np.sort(rng.choice(volume, size=count, replace=False))
    coords = np.column_stack([np.zeros(count, dtype=np.int64), *np.unravel_index(cells, spatial_shape)])

    if d_max is None:
        features = rng.normal(size=(count, channels))
    else:
        features = rng.integers(0, d_max + 1, size=(count, channels)).astype(np.float64)

    features[rng.random(count) < 0.25] = 0.0
    return make_sparse_tensor(coords, features, spatial_shape)


def _random_case(rng: np.random.Generator, d_max: Optional[int] = None):
    shape = tuple(int(v) for v in rng.integers(2, 7, size=3))
    c_in, c_out = (int(v) for v in rng.integers(1, 9, size=2))
    tensor = random_sparse_tensor(rng, shape, c_in, rng.uniform(0.05, 0.5), d_max)
    kernel = KernelWeights.uniform(3, c_in, c_out, rng)
    return tensor, kernel


def max_abs_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """Return the largest absolute error."""
    if actual.size == 0 and expected.size == 0:
        return 0.0
    return float(np.abs(np.asarray(actual, dtype=np.float64) - np.asarray(expected, dtype=np.float64)).max())


def check_oracle_equivalence(seed: int = 0, instances: int = 100) -> Tuple[bool, str]:
    """Submanifold convolution equals the dense convolution sampled at the active centres."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    for _ in range(instances):
        tensor, kernel = _random_case(rng, d_max=4)
        rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
        output = ssc_forward(tensor, kernel, rulebook)
        dense = vsc_forward_dense(tensor.to_dense(), kernel)
        _, x, y, z = rulebook.out_coords.T
        worst = max(worst, max_abs_error(output.features, dense[0, x, y, z]))

    return worst <= 1e-5, f"max error {worst:.2e} over {instances} instances"


def check_strided_oracle(seed: int = 0, instances: int = 50) -> Tuple[bool, str]:
    """Strided kernel 2, stride 2 convolution equals the strided dense convolution at every output site."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    for _ in range(instances):
        tensor, _ = _random_case(rng, d_max=4)
        kernel = KernelWeights.uniform(2, tensor.channels, 3, rng)
        rulebook = build_rulebook(tensor, 2, 2, STRIDED)
        output = ssc_forward(tensor, kernel, rulebook)
        dense = vsc_forward_dense(tensor.to_dense(), kernel, stride=2)
        _, x, y, z = rulebook.out_coords.T
        worst = max(worst, max_abs_error(output.features, dense[0, x, y, z]))

        expected = np.unique(tensor.coords[:, 1:] // 2, axis=0)
        if not np.array_equal(expected, rulebook.out_coords[:, 1:]):
            return False, "strided output sites differ from the sites reached by the input"

    return worst <= 1e-5, f"max error {worst:.2e} over {instances} instances"


def check_adjoint(seed: int = 0, instances: int = 20) -> Tuple[bool, str]:
    """``<forward(x), g> == <x, backward(g)>`` for the input and ``<forward(W), g> == <W, grad_W>`` for the weights."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    for _ in range(instances):
        tensor, kernel = _random_case(rng)
        rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
        output = ssc_forward(tensor, kernel, rulebook)
        grad = rng.normal(size=output.features.shape).astype(np.float32)
        grad_input, grad_kernel = ssc_backward(grad, tensor, kernel, rulebook)

        forward = float(np.sum(output.features.astype(np.float64) * grad))
        scale = max(1.0, abs(forward))
        by_input = float(np.sum(tensor.features.astype(np.float64) * grad_input))
        by_weights = float(np.sum(kernel.weights.astype(np.float64) * grad_kernel.weights))
        worst = max(worst, abs(forward - by_input) / scale, abs(forward - by_weights) / scale)

    return worst <= 1e-5, f"max relative error {worst:.2e} over {instances} instances"


def _two_layer_loss(tensor, first, second, masks, grad, rulebooks) -> float:
    hidden = ssc_forward(tensor, first, rulebooks[0])
    spikes = hidden.with_features(hidden.features * masks)
    output = ssc_forward(spikes, second, rulebooks[1])
    return float(np.sum(output.features.astype(np.float64) * grad))


def check_finite_difference(seed: int = 0, instances: int = 20, samples: int = 12) -> Tuple[bool, str]:
    """Weight gradients of conv, I-LIF, conv agree with central differences when the surrogate masks are frozen.

    With frozen masks the loss is linear in every weight, so the difference quotient is exact up to rounding.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    epsilon = 0.5

    for _ in range(instances):
        tensor, first = _random_case(rng, d_max=4)
        second = KernelWeights.uniform(3, first.c_out, 2, rng)
        rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
        hidden = ssc_forward(tensor, first, rulebook)
        masks = ilif_surrogate_mask(hidden.features, 4)

        spikes = hidden.with_features(hidden.features * masks)
        hidden_rulebook = build_rulebook(spikes, 3, 1, SUBMANIFOLD)
        output = ssc_forward(spikes, second, hidden_rulebook)
        grad = rng.normal(size=output.features.shape).astype(np.float32)

        grad_spikes, grad_second = ssc_backward(grad, spikes, second, hidden_rulebook)
        grad_hidden = ilif_backward(grad_spikes, np.zeros_like(grad_spikes), masks, NeuronParams())
        _, grad_first = ssc_backward(grad_hidden, tensor, first, rulebook)

        rulebooks = (rulebook, hidden_rulebook)
        for weights, analytic, which in ((first, grad_first, 0), (second, grad_second, 1)):
            numeric, exact = [], []
            for _ in range(samples):
                index = tuple(int(rng.integers(0, extent)) for extent in weights.weights.shape)
                values = []
                for sign in (1, -1):
                    perturbed = weights.weights.copy()
                    perturbed[index] += sign * epsilon
                    kernel = KernelWeights(perturbed, weights.kernel_size)
                    pair = (kernel, second) if which == 0 else (first, kernel)
                    values.append(_two_layer_loss(tensor, *pair, masks, grad, rulebooks))
                numeric.append((values[0] - values[1]) / (2 * epsilon))
                exact.append(float(analytic.weights[index]))

            numeric, exact = np.array(numeric), np.array(exact)
            scale = max(1.0, float(np.linalg.norm(exact)))
            worst = max(worst, float(np.linalg.norm(numeric - exact)) / scale)

    return worst <= 1e-3, f"max relative error {worst:.2e} over {instances} instances"


def check_spike_linearity(seed: int = 0, instances: int = 50, d_max: int = 4) -> Tuple[bool, str]:
    """Accumulating weights over the virtual timestep planes equals the matrix forward pass."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    for _ in range(instances):
        tensor, kernel = _random_case(rng, d_max=d_max)
        rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
        matrix = ssc_forward(tensor, kernel, rulebook)
        additions = ssc_forward_accumulate(tensor, kernel, rulebook, d_max)
        worst = max(worst, max_abs_error(additions.features, matrix.features.astype(np.float64)))

    return worst <= 1e-5, f"max error {worst:.2e} over {instances} instances"


def check_operation_audit(seed: int = 0, instances: int = 50, d_max: int = 4) -> Tuple[bool, str]:
    """Instrumented operation counts agree with the counts predicted from pairs, channels and firing rate."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    for index in range(instances):
        binary = index % 2 == 0
        tensor, kernel = _random_case(rng, d_max=1 if binary else d_max)
        rulebook = build_rulebook(tensor, 3, 1, SUBMANIFOLD)
        fr_binary, fr_integer = rulebook_firing_rate(tensor, rulebook)
        ops = rulebook.num_pairs * kernel.c_in * kernel.c_out

        counters, additions = ConvCounters(), ConvCounters()
        ssc_forward(tensor, kernel, rulebook, counters)
        ssc_forward_accumulate(tensor, kernel, rulebook, d_max, additions)

        if counters.macs != ops or counters.acs != additions.acs:
            return False, f"instance {index}: {counters} against {additions} and {ops} operations"

        predicted = [(fr_integer * ops, additions.acs)]
        if binary:
            predicted.append((count_flops(rulebook, kernel.c_in, kernel.c_out, fr_binary), 2 * additions.acs))

        for expected, counted in predicted:
            worst = max(worst, abs(expected - counted) / max(1.0, counted))

    return worst <= 0.01, f"max relative deviation {worst:.2e} over {instances} instances"


def check_energy_arithmetic(seed: int = 0, instances: int = 20) -> Tuple[bool, str]:
    """The energy estimate reproduces hand computed values."""
    from .profiler import EnergyModel, FiringStats, LayerStats, estimate_energy

    model = EnergyModel()
    cases = [
        (FiringStats([LayerStats("stem", 1000, kind="mac")]), 4.6e-9),
        (FiringStats([LayerStats("conv", 1000, firing_rate=0.5)]), 0.45e-9),
        (FiringStats([LayerStats("stem", 1000, kind="mac"), LayerStats("conv", 5000, firing_rate=0.0)]), 4.6e-9),
    ]

    rng = np.random.default_rng(seed)
    for _ in range(instances):
        timesteps = int(rng.integers(1, 5))
        flops = rng.integers(1, 10_000, size=4).astype(float)
        rates = rng.random(4)
        layers = [LayerStats("stem", flops[0], kind="mac")]
        layers += [LayerStats(f"conv{i}", flops[i], firing_rate=rates[i]) for i in range(1, 4)]
        expected = 4.6e-12 * flops[0] + 0.9e-12 * timesteps * float(np.dot(flops[1:], rates[1:]))
        cases.append((FiringStats(layers, timesteps=timesteps), expected))

    for stats, expected in cases:
        energy = estimate_energy(stats, model)
        if not math.isclose(energy, expected, rel_tol=1e-12, abs_tol=0.0):
            return False, f"estimated {energy!r} J, expected {expected!r} J"

    return True, f"{len(cases)} cases reproduced"


def check_identity_residual(seed: int = 0, instances: int = 20) -> Tuple[bool, str]:
    """With zero weights the membrane shortcut of a basic block returns its input bit for bit and the branch is zero."""
    from .network import basic_block_forward

    rng = np.random.default_rng(seed)

    for _ in range(instances):
        potential = random_sparse_tensor(rng, (6, 6, 6), 4, rng.uniform(0.05, 0.5))
        potential = potential.with_features(potential.features * 3)
        kernels = [KernelWeights.zeros(3, 4, 4) for _ in range(3)]
        shortcut, output = basic_block_forward(potential, kernels, NeuronParams())

        if not (shortcut.same_coords(potential) and np.array_equal(shortcut.features, potential.features)):
            return False, "shortcut potential differs from the block input"

        if not (output.same_coords(potential) and not np.any(output.features)):
            return False, "branch output of a zero weight block is not zero"

    return True, f"{instances} blocks passed their input through the shortcut"


def _toy_model(seed: int):
    from .network import Model, NetworkSpec

    spec = NetworkSpec.from_variant("T", num_classes=4, timesteps=1, d_max=4)
    return Model.initialize(spec, seed)


def _toy_inputs(seed: int, n_per_class: int = 1):
    from .trainer import make_toy_dataset, voxelize_dataset
    from .voxelizer import VOXEL_PRESETS

    return voxelize_dataset(make_toy_dataset(seed, n_per_class, num_points=256), VOXEL_PRESETS["modelnet"])


def check_energy_ordering(seed: int = 0, instances: int = 2) -> Tuple[bool, str]:
    """On toy inputs firing rates stay below one and the sparse path costs less than the dense one."""
    from .profiler import profile_trace

    model = _toy_model(seed)

    for voxels, _ in _toy_inputs(seed)[:instances]:
        result = model.forward(voxels)
        report = profile_trace(result.trace, model.spec.timesteps, model.spec.d_max)
        rates = result.trace.firing_rates(kind="neuron")

        if max(rates.values()) >= 1.0:
            return False, f"saturated layer among {rates}"
        if not report.spiking < report.dense:
            return False, f"sparse estimate {report.spiking:.3e} J is not below dense {report.dense:.3e} J"

    return True, f"spiking {report.spiking * 1e3:.4g} mJ < dense {report.dense * 1e3:.4g} mJ"


def check_determinism(seed: int = 0, instances: int = 1) -> Tuple[bool, str]:
    """Two identical training steps from the same seed give identical losses and weights."""
    from .trainer import TrainConfig, train_step

    batch = _toy_inputs(seed)[: max(2, instances)]
    config = TrainConfig(lr=1e-3, optimizer="adam", batch_size=len(batch), epochs=1, seed=seed)
    runs = []

    for _ in range(2):
        model = _toy_model(seed)
        result = train_step(batch, model, config)
        runs.append((result.loss, model.params))

    (first_loss, first), (second_loss, second) = runs
    same = first_loss == second_loss and all(np.array_equal(first[name], second[name]) for name in first)
    return same, f"losses {first_loss!r} and {second_loss!r}"


CHECKS: Dict[str, Callable[..., Tuple[bool, str]]] = {
    "oracle_equivalence": check_oracle_equivalence,
    "strided_oracle": check_strided_oracle,
    "adjoint": check_adjoint,
    "finite_difference": check_finite_difference,
    "spike_linearity": check_spike_linearity,
    "operation_audit": check_operation_audit,
    "energy_arithmetic": check_energy_arithmetic,
    "identity_residual": check_identity_residual,
    "energy_ordering": check_energy_ordering,
    "determinism": check_determinism,
}


def run_check(name: str, seed: int = 0, instances: Optional[int] = None) -> CheckResult:
    """Run one check, turning an exception into a failed result."""
    check = CHECKS[name]
    start = time.perf_counter()

    try:
        passed, detail = check(seed) if instances is None else check(seed, instances)
    except Exception as exception:  # pylint: disable=broad-except
        LOGGER.exception("check `%s` raised", name)
        passed, detail = False, f"{type(exception).__name__}: {exception}"

    return CheckResult(name, bool(passed), detail, time.perf_counter() - start)


def run_all(seed: int = 0, names: Optional[List[str]] = None) -> List[CheckResult]:
    return [run_check(name, seed) for name in (names or list(CHECKS))]

