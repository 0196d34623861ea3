# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.trainer` module."""
import json
import os
from dataclasses import replace

import numpy as np
import pytest

from spikevox.exceptions import ConfigError, DataError, EmptyDataset, NonFiniteLoss
from spikevox.network import Model, NetworkSpec
from spikevox.trainer import (
    TOY_CLASSES,
    TRAIN_PRESETS,
    Adam,
    AdamW,
    SGDMomentum,
    TrainConfig,
    cross_entropy,
    evaluate,
    fit,
    learning_rate,
    make_optimizer,
    make_toy_dataset,
    sample_gradients,
    train_step,
    voxelize_dataset,
)
from spikevox.voxelizer import VOXEL_PRESETS


@pytest.fixture(scope="module")
def toy_samples():
    return voxelize_dataset(make_toy_dataset(seed=0, n_per_class=2, num_points=256), VOXEL_PRESETS["modelnet"])


@pytest.fixture
def toy_model():
    spec = NetworkSpec(
        variant="custom",
        blocks_per_stage=(1, 0, 0, 0),
        channels_per_stage=(4, 4, 8, 8),
        stem_channels=4,
        num_classes=len(TOY_CLASSES),
    )
    return Model.initialize(spec, seed=0)


def test_cross_entropy():
    loss, grad = cross_entropy(np.zeros(4), 1)

    assert loss == pytest.approx(np.log(4))
    np.testing.assert_allclose(grad, [0.25, -0.75, 0.25, 0.25])


def test_learning_rate_cosine():
    config = TrainConfig(lr=0.2)

    assert learning_rate(config, 0, 10) == pytest.approx(0.2)
    assert learning_rate(config, 5, 10) == pytest.approx(0.1)
    assert learning_rate(config, 10, 10) == pytest.approx(0.0)
    assert learning_rate(replace(config, schedule="constant"), 5, 10) == 0.2


@pytest.mark.parametrize(
    "kwargs",
    (
        {"lr": 0.0},
        {"weight_decay": -1.0},
        {"batch_size": 0},
        {"optimizer": "rmsprop"},
        {"schedule": "step"},
        {"max_grad_norm": 0.0},
    ),
)
def test_train_config_invalid(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_train_presets():
    assert TRAIN_PRESETS["modelnet40"].optimizer == "sgd_momentum"
    assert TRAIN_PRESETS["semantic_kitti"].optimizer == "adamw"
    assert isinstance(make_optimizer({}, TRAIN_PRESETS["kitti"]), Adam)


def test_sgd_momentum():
    params = {"w": np.ones(1, dtype=np.float32)}
    optimizer = SGDMomentum(params, TrainConfig(lr=0.1, weight_decay=0.0, momentum=0.9))
    grads = {"w": np.full(1, 0.5, dtype=np.float32)}

    optimizer.step(grads, 0.1)
    np.testing.assert_allclose(params["w"], [0.95], rtol=1e-6)

    optimizer.step(grads, 0.1)
    np.testing.assert_allclose(params["w"], [0.855], rtol=1e-6)


def test_adam_first_step():
    params = {"w": np.ones(1, dtype=np.float32)}
    Adam(params, TrainConfig(lr=0.1, weight_decay=0.0, optimizer="adam")).step({"w": np.full(1, 0.5)}, 0.1)

    np.testing.assert_allclose(params["w"], [0.9], rtol=1e-6)


def test_adamw_decoupled_decay():
    params = {"w": np.ones(1, dtype=np.float32)}
    AdamW(params, TrainConfig(lr=0.1, weight_decay=0.5, optimizer="adamw")).step({"w": np.zeros(1)}, 0.1)

    np.testing.assert_allclose(params["w"], [0.95], rtol=1e-6)


def test_make_toy_dataset():
    dataset = make_toy_dataset(seed=3, n_per_class=2, num_points=128)

    assert [label for _, label in dataset] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert all(len(cloud) == 128 for cloud, _ in dataset)
    assert all(np.abs(cloud.points).max() < 0.2 for cloud, _ in dataset)

    sphere = dataset[0][0].points
    np.testing.assert_allclose(np.linalg.norm(sphere, axis=1), 0.15, atol=0.016)


def test_make_toy_dataset_deterministic():
    first = make_toy_dataset(seed=1, n_per_class=1, num_points=64)
    second = make_toy_dataset(seed=1, n_per_class=1, num_points=64)

    for (left, _), (right, _) in zip(first, second):
        np.testing.assert_array_equal(left.points, right.points)

    with pytest.raises(ConfigError):
        make_toy_dataset(seed=1, n_per_class=0)


def test_sample_gradients(toy_model, toy_samples):
    voxels, label = toy_samples[0]
    result = sample_gradients(toy_model, voxels, label)

    assert np.isfinite(result.loss)
    assert 0 <= result.firing_rate <= 1
    assert set(result.grads) == set(toy_model.params)


def test_sample_gradients_non_finite(toy_model, toy_samples):
    toy_model.params["head.bias"][0] = np.nan

    with pytest.raises(NonFiniteLoss):
        sample_gradients(toy_model, *toy_samples[0])


def test_train_step_updates_parameters(toy_model, toy_samples):
    before = {name: value.copy() for name, value in toy_model.params.items()}
    result = train_step(toy_samples[:4], toy_model, TrainConfig(lr=0.01, optimizer="adam"))

    assert np.isfinite(result.loss)
    assert result.grad_norm > 0
    assert 0 <= result.accuracy <= 1
    assert not np.array_equal(before["head.bias"], toy_model.params["head.bias"])


def test_train_step_threads_are_deterministic(toy_samples):
    spec = NetworkSpec(variant="custom", channels_per_stage=(4, 4, 8, 8), stem_channels=4, num_classes=4)
    single, threaded = Model.initialize(spec, seed=1), Model.initialize(spec, seed=1)

    train_step(toy_samples, single, TrainConfig(lr=0.01, threads=1))
    train_step(toy_samples, threaded, TrainConfig(lr=0.01, threads=3))

    for name, value in single.params.items():
        np.testing.assert_array_equal(value, threaded.params[name])


def test_train_step_gradient_clipping(toy_model, toy_samples):
    config = TrainConfig(lr=1.0, momentum=0.0, weight_decay=0.0, max_grad_norm=1e-3)
    before = {name: value.copy() for name, value in toy_model.params.items()}
    train_step(toy_samples[:2], toy_model, config)

    step = np.sqrt(sum(np.sum((toy_model.params[name] - before[name]).astype(np.float64) ** 2) for name in before))
    assert step == pytest.approx(1e-3, rel=1e-2)


def test_empty_datasets(toy_model):
    with pytest.raises(EmptyDataset):
        train_step([], toy_model, TrainConfig())

    with pytest.raises(EmptyDataset):
        evaluate([], toy_model)

    with pytest.raises(EmptyDataset):
        fit(toy_model, [], TrainConfig())


def test_fit(tmp_path, toy_model, toy_samples):
    log = tmp_path / "train_log.jsonl"
    config = TrainConfig(lr=0.01, batch_size=4, epochs=2, optimizer="adam")
    result = fit(toy_model, toy_samples, config, test=toy_samples[:4], log_path=log)

    records = [json.loads(line) for line in log.read_text().splitlines()]
    steps = [record for record in records if record.get("test_accuracy") is None]

    assert len(steps) == 4
    assert [record["step"] for record in steps] == [0, 1, 2, 3]
    assert all(np.isfinite(record["loss"]) for record in steps)
    assert 0 <= result.test_accuracy <= 1
    assert [epoch["epoch"] for epoch in result.epochs] == [0, 1]
    assert evaluate(toy_samples, toy_model) >= 0


def test_zero_learning_rate_keeps_weights(toy_model, toy_samples):
    before = {name: value.copy() for name, value in toy_model.params.items()}
    train_step(toy_samples[:2], toy_model, TrainConfig(lr=0.1), lr=0.0)

    for name, value in before.items():
        np.testing.assert_array_equal(toy_model.params[name], value)


def test_loss_decreases(toy_model, toy_samples):
    """The median loss over the first 50 steps lies below the loss of the first step."""
    batch = toy_samples[::2]
    config = TrainConfig(lr=1e-2, weight_decay=0.0, optimizer="adam", schedule="constant")
    optimizer = make_optimizer(toy_model.params, config)
    losses = [train_step(batch, toy_model, config, optimizer).loss for _ in range(50)]

    assert np.median(losses) < losses[0]
    assert np.all(np.isfinite(losses))


def test_single_sample_overfit(toy_model, toy_samples):
    sample = toy_samples[3]
    config = TrainConfig(lr=5e-2, weight_decay=0.0, optimizer="adam", schedule="constant")
    optimizer = make_optimizer(toy_model.params, config)

    for _ in range(200):
        loss = train_step([sample], toy_model, config, optimizer).loss
        if loss < 0.01:
            break

    assert loss < 0.01
    assert evaluate([sample], toy_model) == 1.0


def test_gradient_flow_at_init(toy_model, toy_samples):
    """Fewer than half of the convolution weights receive an exactly zero gradient from one batch."""
    total = {name: np.zeros_like(value) for name, value in toy_model.params.items()}
    for voxels, label in toy_samples:
        for name, grad in sample_gradients(toy_model, voxels, label).grads.items():
            total[name] += np.abs(grad)

    conv = [grad for name, grad in total.items() if not name.startswith("head.")]
    zero = sum(int(np.count_nonzero(grad == 0)) for grad in conv)

    assert zero / sum(grad.size for grad in conv) < 0.5


def test_evaluate_shuffled_labels_is_chance(toy_model):
    """An untrained model scores about ``1 / K`` on balanced labels that carry no information about the input."""
    samples = voxelize_dataset(make_toy_dataset(seed=5, n_per_class=50, num_points=128), VOXEL_PRESETS["modelnet"])
    labels = np.random.default_rng(0).permutation([label for _, label in samples])
    shuffled = [(voxels, int(label)) for (voxels, _), label in zip(samples, labels)]

    assert len(shuffled) == 200
    assert evaluate(shuffled, toy_model) == pytest.approx(1 / len(TOY_CLASSES), abs=0.1)


def test_evaluate_memorised_labels(toy_model, toy_samples):
    memorised = [(voxels, toy_model.predict(voxels)) for voxels, _ in toy_samples]

    assert evaluate(memorised, toy_model, threads=2) == 1.0


def test_fit_log_survives_interruption(monkeypatch, tmp_path, toy_model, toy_samples):
    """Every step record is on disk as soon as the step finishes."""
    log = tmp_path / "train_log.jsonl"
    calls = []
    original = train_step

    def interrupted(*args, **kwargs):
        if len(calls) == 2:
            raise KeyboardInterrupt
        calls.append(None)
        return original(*args, **kwargs)

    monkeypatch.setattr("spikevox.trainer.train_step", interrupted)

    with pytest.raises(KeyboardInterrupt):
        fit(toy_model, toy_samples, TrainConfig(lr=0.01, batch_size=2, epochs=3, optimizer="adam"), log_path=log)

    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert [record["step"] for record in records] == [0, 1]


def test_fit_log_missing_directory(tmp_path, toy_model, toy_samples):
    with pytest.raises(DataError, match="training log"):
        fit(toy_model, toy_samples, TrainConfig(epochs=1), log_path=tmp_path / "missing" / "log.jsonl")


@pytest.mark.slow
def test_toy_preset_reaches_accuracy_target():
    """Variant T learns the toy dataset to 90% test accuracy within the epochs of the ``toy`` preset."""
    config = replace(TRAIN_PRESETS["toy"], threads=os.cpu_count() or 1)
    train = voxelize_dataset(make_toy_dataset(seed=0, n_per_class=50), VOXEL_PRESETS["modelnet"])
    test = voxelize_dataset(make_toy_dataset(seed=1, n_per_class=20), VOXEL_PRESETS["modelnet"])
    model = Model.initialize(NetworkSpec.from_variant("T", num_classes=len(TOY_CLASSES)), seed=0)

    result = fit(model, train, config, test)

    assert len(train) == 200
    assert len(test) == 80
    assert result.test_accuracy >= 0.9
