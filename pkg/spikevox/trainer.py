# -*- coding: utf-8 -*-
"""Surrogate gradient training through time, evaluation and the synthetic toy dataset."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import log_softmax, softmax

from .exceptions import ConfigError, DataError, EmptyDataset, NonFiniteLoss
from .network import Model
from .sparse_core import SparseVoxelTensor
from .voxelizer import PointCloud, VoxelConfig, voxelize

LOGGER = logging.getLogger(__name__)

Sample = Tuple[SparseVoxelTensor, int]

OPTIMIZER_NAMES = ("sgd_momentum", "adam", "adamw")
SCHEDULES = ("cosine", "constant")
TOY_CLASSES = ("sphere", "cube", "cross", "cylinder")


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings. ``threads`` only changes the speed, never the result."""

    lr: float = 0.1
    weight_decay: float = 1e-4
    batch_size: int = 16
    epochs: int = 200
    optimizer: str = "sgd_momentum"
    seed: int = 0
    momentum: float = 0.9
    schedule: str = "cosine"
    max_grad_norm: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must not be negative, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 1 or self.threads < 1:
            raise ConfigError("batch_size, epochs and threads must be at least 1")
        if self.optimizer not in OPTIMIZER_NAMES:
            raise ConfigError(f"unknown optimizer `{self.optimizer}`, choose from {OPTIMIZER_NAMES}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule `{self.schedule}`, choose from {SCHEDULES}")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ConfigError(f"max_grad_norm must be positive, got {self.max_grad_norm}")


TRAIN_PRESETS: Dict[str, TrainConfig] = {
    "modelnet40": TrainConfig(lr=1e-1, weight_decay=1e-4, batch_size=16, epochs=200, optimizer="sgd_momentum"),
    "kitti": TrainConfig(lr=1e-2, weight_decay=1e-2, batch_size=64, epochs=80, optimizer="adam"),
    "semantic_kitti": TrainConfig(lr=2e-3, weight_decay=5e-3, batch_size=96, epochs=100, optimizer="adamw"),
    "toy": TrainConfig(lr=2e-3, weight_decay=0.0, batch_size=8, epochs=30, optimizer="adam"),
}


class Optimizer:
    """Updates a dictionary of parameter arrays in place."""

    def __init__(self, params: Dict[str, np.ndarray], config: TrainConfig):
        self.params = params
        self.config = config
        self.steps = 0

    def step(self, grads: Dict[str, np.ndarray], lr: float) -> None:
        self.steps += 1
        for name, param in self.params.items():
            self.update(name, param, grads[name].astype(np.float32), lr)

    def update(self, name: str, param: np.ndarray, grad: np.ndarray, lr: float) -> None:
        raise NotImplementedError


class SGDMomentum(Optimizer):
    """SGD with heavy-ball momentum and L2 weight decay."""

    def __init__(self, params, config):
        super().__init__(params, config)
        self.velocity = {name: np.zeros_like(value) for name, value in params.items()}

    def update(self, name, param, grad, lr):
        velocity = self.velocity[name]
        velocity *= self.config.momentum
        velocity += grad + self.config.weight_decay * param
        param -= np.float32(lr) * velocity


class Adam(Optimizer):
    """Adam with L2 weight decay added to the gradient."""

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8
    decoupled = False

    def __init__(self, params, config):
        super().__init__(params, config)
        self.first = {name: np.zeros_like(value) for name, value in params.items()}
        self.second = {name: np.zeros_like(value) for name, value in params.items()}

    def update(self, name, param, grad, lr):
        if self.decoupled:
            param -= np.float32(lr * self.config.weight_decay) * param
        else:
            grad = grad + self.config.weight_decay * param

        first, second = self.first[name], self.second[name]
        first *= self.beta1
        first += (1 - self.beta1) * grad
        second *= self.beta2
        second += (1 - self.beta2) * grad * grad
        first_hat = first / (1 - self.beta1**self.steps)
        second_hat = second / (1 - self.beta2**self.steps)
        param -= (lr * first_hat / (np.sqrt(second_hat) + self.eps)).astype(np.float32)


class AdamW(Adam):
    """Adam with decoupled weight decay."""

    decoupled = True


OPTIMIZERS = {"sgd_momentum": SGDMomentum, "adam": Adam, "adamw": AdamW}


def make_optimizer(params: Dict[str, np.ndarray], config: TrainConfig) -> Optimizer:
    return OPTIMIZERS[config.optimizer](params, config)


def learning_rate(config: TrainConfig, step: int, total_steps: int) -> float:
    """Return the learning rate of ``step``, decaying along a half cosine to zero at ``total_steps``."""
    if config.schedule == "constant" or total_steps <= 1:
        return config.lr
    return 0.5 * config.lr * (1 + math.cos(math.pi * min(step, total_steps) / total_steps))


def cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """Return the cross entropy of ``logits`` for ``label`` and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    loss = -float(log_softmax(logits)[label])
    grad = softmax(logits)
    grad[label] -= 1.0
    return loss, grad.astype(np.float32)


@dataclass
class SampleResult:
    loss: float
    grads: Dict[str, np.ndarray]
    firing_rate: float
    correct: bool


def sample_gradients(model: Model, voxels: SparseVoxelTensor, label: int) -> SampleResult:
    """Forward and backpropagate one sample through all timesteps.

    :raises NonFiniteLoss: if the loss is not finite.
    """
    result = model.forward(voxels, retain=True)
    loss, grad_logits = cross_entropy(result.logits, label)

    if not np.isfinite(loss):
        raise NonFiniteLoss(f"non-finite loss {loss} for label {label} with logits {result.logits.tolist()}")

    rates = result.trace.firing_rates(kind="neuron")
    return SampleResult(
        loss=loss,
        grads=model.backward(result, grad_logits),
        firing_rate=float(np.mean(list(rates.values()))) if rates else 0.0,
        correct=int(np.argmax(result.logits)) == label,
    )


def _map(function: Callable, items: Sequence, threads: int) -> list:
    """Apply ``function`` to ``items``, returning the results in the order of ``items``."""
    if threads <= 1 or len(items) <= 1:
        return [function(item) for item in items]

    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, items))


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(grad, dtype=np.float64))) for grad in grads.values())))


@dataclass
class StepResult:
    loss: float
    lr: float
    grad_norm: float
    firing_rate: float
    accuracy: float


def train_step(
    batch: Sequence[Sample],
    model: Model,
    config: TrainConfig,
    optimizer: Optional[Optimizer] = None,
    lr: Optional[float] = None,
) -> StepResult:
    """Run one optimisation step on ``batch`` with the mean cross entropy over its samples.

    Per sample gradients are computed on ``config.threads`` threads and summed in batch order. Without ``optimizer``
    a fresh one is created, without ``lr`` the configured base learning rate is used.

    :raises EmptyDataset: if ``batch`` is empty.
    :raises NonFiniteLoss: if a sample loss or the gradient norm is not finite.
    """
    if not batch:
        raise EmptyDataset("cannot take a training step on an empty batch")

    optimizer = optimizer or make_optimizer(model.params, config)
    lr = config.lr if lr is None else lr
    results = _map(lambda sample: sample_gradients(model, *sample), batch, config.threads)

    grads = {name: np.zeros_like(value) for name, value in model.params.items()}
    for result in results:
        for name, grad in result.grads.items():
            grads[name] += grad
    for grad in grads.values():
        grad /= len(results)

    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NonFiniteLoss(f"non-finite gradient norm {norm}")

    if config.max_grad_norm is not None and norm > config.max_grad_norm:
        for grad in grads.values():
            grad *= config.max_grad_norm / norm

    optimizer.step(grads, lr)

    return StepResult(
        loss=float(np.mean([result.loss for result in results])),
        lr=lr,
        grad_norm=norm,
        firing_rate=float(np.mean([result.firing_rate for result in results])),
        accuracy=float(np.mean([result.correct for result in results])),
    )


def evaluate(dataset: Sequence[Sample], model: Model, threads: int = 1) -> float:
    """Return the top-1 accuracy of ``model`` on ``dataset``.

    :raises EmptyDataset: if ``dataset`` is empty.
    """
    if not dataset:
        raise EmptyDataset("cannot evaluate on an empty dataset")

    predictions = _map(lambda sample: model.predict(sample[0]), dataset, threads)
    return float(np.mean([prediction == label for prediction, (_, label) in zip(predictions, dataset)]))


def _jitter(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    """Gaussian jitter with the length of every displacement truncated at ``3 * sigma``."""
    noise = rng.normal(0.0, sigma, size=(size, 3))
    length = np.linalg.norm(noise, axis=1, keepdims=True)
    return noise * np.minimum(1.0, 3 * sigma / np.maximum(length, 1e-12))


def _toy_shape(label: int, rng: np.random.Generator, num_points: int) -> np.ndarray:
    if label == 0:
        directions = rng.normal(size=(num_points, 3))
        return 0.15 * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    if label == 1:
        points = rng.uniform(-0.1, 0.1, size=(num_points, 3))
        axis = rng.integers(0, 3, size=num_points)
        points[np.arange(num_points), axis] = rng.choice([-0.1, 0.1], size=num_points)
        return points

    if label == 2:
        points = np.zeros((num_points, 3))
        in_plane = rng.uniform(-0.12, 0.12, size=(num_points, 2))
        vertical = rng.random(num_points) < 0.5
        points[vertical, 1:] = in_plane[vertical]
        points[~vertical, 0] = in_plane[~vertical, 0]
        points[~vertical, 2] = in_plane[~vertical, 1]
        return points

    angle = rng.uniform(0, 2 * np.pi, size=num_points)
    height = rng.uniform(-0.15, 0.15, size=num_points)
    return np.column_stack([0.1 * np.cos(angle), 0.1 * np.sin(angle), height])


def make_toy_dataset(
    seed: int, n_per_class: int, num_points: int = 512, jitter: float = 0.005
) -> List[Tuple[PointCloud, int]]:
    """Generate ``n_per_class`` clouds of each toy class: sphere shell, cube shell, two-plane cross and cylinder.

    Every cloud is rotated by a random angle about the vertical axis and jittered. Every coordinate stays inside the
    ``modelnet`` clip box of half-width 0.2. Samples are ordered by class.
    """
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be at least 1, got {n_per_class}")

    rng = np.random.default_rng(seed)
    dataset = []

    for label, name in enumerate(TOY_CLASSES):
        for _ in range(n_per_class):
            points = _toy_shape(label, rng, num_points)
            angle = rng.uniform(0, 2 * np.pi)
            cos, sin = np.cos(angle), np.sin(angle)
            rotation = np.array([[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]])
            points = points @ rotation.T + _jitter(rng, num_points, jitter)
            dataset.append((PointCloud(points, metadata={"class": name}), label))

    return dataset


def voxelize_dataset(clouds: Sequence[Tuple[PointCloud, int]], config: VoxelConfig) -> List[Sample]:
    return [(voxelize(cloud, config), label) for cloud, label in clouds]


@dataclass
class FitResult:
    history: pd.DataFrame
    test_accuracy: Optional[float] = None
    epochs: List[dict] = field(default_factory=list)


class TrainingLog:
    """JSON lines file that receives every record as soon as it is produced, so an interrupted run keeps its history."""

    def __init__(self, path: Optional[Union[str, Path]]):
        self.path = path
        self.records: List[dict] = []
        self._handle = None

        if path is not None:
            try:
                self._handle = open(path, "w", encoding="utf-8")  # pylint: disable=consider-using-with
            except OSError as exception:
                raise DataError(f"cannot write the training log `{path}`: {exception}") from exception

    def __enter__(self) -> "TrainingLog":
        return self

    def __exit__(self, *exc_info):
        if self._handle is not None:
            self._handle.close()

    def append(self, record: dict) -> None:
        self.records.append(record)

        if self._handle is not None:
            self._handle.write(json.dumps(record, default=float) + "\n")
            self._handle.flush()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records)


def fit(
    model: Model,
    train: Sequence[Sample],
    config: TrainConfig,
    test: Optional[Sequence[Sample]] = None,
    log_path: Optional[Union[str, Path]] = None,
    progress: bool = False,
) -> FitResult:
    """Train ``model`` for ``config.epochs`` epochs, shuffling with ``config.seed`` and evaluating after every epoch.

    One record per step with ``epoch, step, loss, lr, fr_mean`` and one per epoch with ``test_accuracy`` are appended
    to ``log_path`` as JSON lines while training runs.

    :raises EmptyDataset: if ``train`` is empty.
    """
    if not train:
        raise EmptyDataset("the training set is empty")

    optimizer = make_optimizer(model.params, config)
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = math.ceil(len(train) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    epochs = []
    step = 0
    test_accuracy = None

    epoch_range = range(config.epochs)
    if progress:
        from rich.progress import track

        epoch_range = track(epoch_range, description="Training...")

    with TrainingLog(log_path) as log:
        for epoch in epoch_range:
            order = rng.permutation(len(train))
            losses = []

            for start in range(0, len(train), config.batch_size):
                batch = [train[index] for index in order[start : start + config.batch_size]]
                result = train_step(batch, model, config, optimizer, learning_rate(config, step, total_steps))
                losses.append(result.loss)
                log.append(
                    {"epoch": epoch, "step": step, "loss": result.loss, "lr": result.lr, "fr_mean": result.firing_rate}
                )
                step += 1

            summary = {"epoch": epoch, "train_loss": float(np.mean(losses))}
            if test:
                test_accuracy = evaluate(test, model, config.threads)
                summary["test_accuracy"] = test_accuracy
                log.append({"epoch": epoch, "step": step, "test_accuracy": test_accuracy})

            epochs.append(summary)
            LOGGER.info("epoch %d: %s", epoch, summary)

    return FitResult(log.to_frame(), test_accuracy, epochs)
