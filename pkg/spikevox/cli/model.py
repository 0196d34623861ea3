# -*- coding: utf-8 -*-
"""Commands to train, evaluate and profile a network."""
from pathlib import Path
from typing import Annotated, Any, Dict, Optional

import typer
from rich import print
from rich.progress import track

from ..exceptions import EmptyDataset
from .main import (
    ClipOption,
    FeatureModeOption,
    PointsOption,
    PresetOption,
    SeedOption,
    ThreadsOption,
    Variant,
    VoxelSizeOption,
    app,
    echo_config,
    resolve_threads,
    resolve_voxel_config,
)

SECTIONS = ("network", "train", "voxel")

CheckpointOption = Annotated[Path, typer.Option("--checkpoint", help="Checkpoint `.swt` file with its `.cfg`.")]


def voxel_config_path(checkpoint: Path) -> Path:
    return checkpoint.with_suffix(".voxel.cfg")


def load_sections(config: Optional[Path]) -> Dict[str, Dict[str, Any]]:
    """Read the ``network``, ``train`` and ``voxel`` sections of a configuration file.

    A file without sections configures the training only.
    """
    from ..config import load_mapping
    from ..exceptions import ConfigError

    if config is None:
        return {}

    mapping = load_mapping(config)

    if not any(section in mapping for section in SECTIONS):
        return {"train": mapping}

    unknown = set(mapping) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)} in `{config}`, valid sections are {SECTIONS}")

    return {section: dict(mapping.get(section) or {}) for section in SECTIONS}


def load_dataset(manifest: Path, config, points: int, seed: int, description: str):
    """Voxelize every sample listed in ``manifest``."""
    from ..data_io import load_voxels, read_manifest

    frame = read_manifest(manifest)

    if frame.empty:
        raise EmptyDataset(f"the manifest `{manifest}` lists no sample")

    rows = list(frame.itertuples(index=False))
    return [(load_voxels(row.path, config, points, seed), int(row.label)) for row in track(rows, description)]


def load_model(checkpoint: Path):
    from ..network import Model, load_checkpoint

    spec, params = load_checkpoint(checkpoint)
    return Model(spec, params)


def checkpoint_voxel_config(checkpoint: Path, preset, clip, voxel_size, feature_mode):
    """Return the voxel configuration stored with ``checkpoint``, updated by the flags."""
    from ..config import load_mapping

    path = voxel_config_path(checkpoint)
    overrides = load_mapping(path) if path.exists() else None
    return resolve_voxel_config(preset, clip, voxel_size, feature_mode, overrides)


@app.command()
def train(
    manifest: Annotated[Path, typer.Argument(help="CSV manifest with `path,label` rows.")],
    test_manifest: Annotated[Optional[Path], typer.Option("--test-manifest", help="Manifest of the test set.")] = None,
    config: Annotated[
        Optional[Path], typer.Option("--config", help="YAML or key=value file with network, train and voxel sections.")
    ] = None,
    train_preset: Annotated[str, typer.Option("--train-preset", help="Training hyper-parameter preset.")] = "toy",
    variant: Annotated[Optional[Variant], typer.Option("--variant", help="Architecture variant.")] = None,
    timesteps: Annotated[Optional[int], typer.Option("--timesteps", help="Number of timesteps T.")] = None,
    dmax: Annotated[Optional[int], typer.Option("--dmax", help="Maximum integer spike D.")] = None,
    num_classes: Annotated[
        Optional[int], typer.Option("--num-classes", help="Defaults to the largest label + 1.")
    ] = None,
    epochs: Annotated[Optional[int], typer.Option("--epochs")] = None,
    lr: Annotated[Optional[float], typer.Option("--lr")] = None,
    batch_size: Annotated[Optional[int], typer.Option("--batch-size")] = None,
    optimizer: Annotated[Optional[str], typer.Option("--optimizer", help="sgd_momentum, adam or adamw.")] = None,
    preset: PresetOption = "modelnet",
    clip: ClipOption = None,
    voxel_size: VoxelSizeOption = None,
    feature_mode: FeatureModeOption = None,
    points: PointsOption = 1024,
    seed: SeedOption = 0,
    threads: ThreadsOption = None,
    checkpoint: Annotated[Path, typer.Option("--checkpoint", help="Checkpoint file to write.")] = Path("model.swt"),
    log: Annotated[Path, typer.Option("--log", help="JSON lines training log to write.")] = Path("train_log.jsonl"),
):
    """Train a network on the samples of a manifest and write the checkpoint and the training log."""
    from dataclasses import replace

    from ..config import from_mapping, save_config, spec_to_mapping
    from ..exceptions import ConfigError
    from ..network import Model, NetworkSpec, count_parameters, save_checkpoint
    from ..trainer import TRAIN_PRESETS, TrainConfig, evaluate, fit

    if train_preset not in TRAIN_PRESETS:
        raise ConfigError(f"unknown training preset `{train_preset}`, choose from {sorted(TRAIN_PRESETS)}")

    sections = load_sections(config)
    voxel = resolve_voxel_config(preset, clip, voxel_size, feature_mode, sections.get("voxel"))

    flags = {"epochs": epochs, "lr": lr, "batch_size": batch_size, "optimizer": optimizer}
    base = spec_to_mapping(TRAIN_PRESETS[train_preset])
    train_config = from_mapping(TrainConfig, {**base, **sections.get("train", {})})
    train_config = replace(
        train_config,
        seed=seed,
        threads=resolve_threads(threads),
        **{key: value for key, value in flags.items() if value is not None},
    )

    train_set = load_dataset(manifest, voxel, points, seed, "Loading training set...")
    test_set = load_dataset(test_manifest, voxel, points, seed, "Loading test set...") if test_manifest else None

    network = dict(sections.get("network", {}))
    flags = {"timesteps": timesteps, "d_max": dmax, "num_classes": num_classes}
    network.update({key: value for key, value in flags.items() if value is not None})
    network.setdefault("num_classes", max(label for _, label in train_set) + 1)
    network["in_channels"] = voxel.feature_mode.channels
    name = variant.value if variant is not None else network.pop("variant", "T")
    network.pop("variant", None)
    base = NetworkSpec(variant=name) if name == "custom" else NetworkSpec.from_variant(name)
    spec = from_mapping(NetworkSpec, {**spec_to_mapping(base), **network})

    echo_config(network=spec, train=train_config, voxel=voxel, manifest=manifest, checkpoint=checkpoint, log=log)
    print(f"[bold blue]Info:[/] Training {count_parameters(spec)} parameters on {len(train_set)} samples.")

    model = Model.initialize(spec, seed)
    result = fit(model, train_set, train_config, test_set, log_path=log, progress=True)

    save_checkpoint(checkpoint, spec, model.params)
    save_config(voxel, voxel_config_path(checkpoint))

    accuracy = evaluate(train_set, model, train_config.threads)
    print(f"[bold blue]Info:[/] Training accuracy: {accuracy:.4f}")

    if result.test_accuracy is not None:
        print(f"[bold blue]Info:[/] Test accuracy: {result.test_accuracy:.4f}")

    print(f"[bold green]Success:[/] Wrote checkpoint `{checkpoint}` and training log `{log}`.")


@app.command("eval")
def evaluate_command(
    manifest: Annotated[Path, typer.Argument(help="CSV manifest with `path,label` rows.")],
    checkpoint: CheckpointOption,
    preset: PresetOption = "modelnet",
    clip: ClipOption = None,
    voxel_size: VoxelSizeOption = None,
    feature_mode: FeatureModeOption = None,
    points: PointsOption = 1024,
    seed: SeedOption = 0,
    threads: ThreadsOption = None,
):
    """Report the top-1 accuracy of a checkpoint on the samples of a manifest."""
    from ..trainer import evaluate

    voxel = checkpoint_voxel_config(checkpoint, preset, clip, voxel_size, feature_mode)
    threads = resolve_threads(threads)
    model = load_model(checkpoint)
    echo_config(network=model.spec, voxel=voxel, manifest=manifest, checkpoint=checkpoint, seed=seed, threads=threads)

    dataset = load_dataset(manifest, voxel, points, seed, "Loading samples...")
    accuracy = evaluate(dataset, model, threads)
    print(f"[bold green]Success:[/] Accuracy {accuracy:.4f} on {len(dataset)} samples.")


@app.command()
def profile(
    source: Annotated[Path, typer.Argument(help="Input `.svt`, `.xyz` or `.off` file.")],
    checkpoint: CheckpointOption,
    preset: PresetOption = "modelnet",
    clip: ClipOption = None,
    voxel_size: VoxelSizeOption = None,
    feature_mode: FeatureModeOption = None,
    points: PointsOption = 1024,
    seed: SeedOption = 0,
    e_mac: Annotated[float, typer.Option("--e-mac", help="Energy of one MAC in joules.")] = 4.6e-12,
    e_ac: Annotated[float, typer.Option("--e-ac", help="Energy of one AC in joules.")] = 0.9e-12,
    table_format: Annotated[str, typer.Option("--table-format", help="Any `tabulate` table format.")] = "simple",
):
    """Run one sample through a checkpoint and report firing rates, operation counts and energy per layer."""
    from ..data_io import load_voxels
    from ..profiler import EnergyModel, profile_trace

    voxel = checkpoint_voxel_config(checkpoint, preset, clip, voxel_size, feature_mode)
    energy = EnergyModel(e_mac=e_mac, e_ac=e_ac)
    model = load_model(checkpoint)
    echo_config(network=model.spec, voxel=voxel, energy=energy, source=source, checkpoint=checkpoint, seed=seed)

    result = model.forward(load_voxels(source, voxel, points, seed))
    report = profile_trace(result.trace, model.spec.timesteps, model.spec.d_max, energy)

    typer.echo(report.table(table_format))

    for name, value in report.totals_mj().items():
        print(f"[bold blue]Info:[/] {name} energy: {value:.6g} mJ")

    print(f"[bold green]Success:[/] Predicted class {int(result.logits.argmax())} for `{source}`.")
