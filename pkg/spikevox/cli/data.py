# -*- coding: utf-8 -*-
"""Commands to prepare input data: voxelize point clouds and generate the toy dataset."""
from pathlib import Path
from typing import Annotated, Optional

import typer
from rich import print
from rich.progress import track

from .main import (
    ClipOption,
    FeatureModeOption,
    PointsOption,
    PresetOption,
    SeedOption,
    VoxelSizeOption,
    app,
    echo_config,
    resolve_voxel_config,
)


@app.command()
def voxelize(
    source: Annotated[Path, typer.Argument(help="Point cloud `.xyz` or mesh `.off` file.")],
    output: Annotated[Optional[Path], typer.Option("--output", "-o", help="Target `.svt` file.")] = None,
    preset: PresetOption = "modelnet",
    clip: ClipOption = None,
    voxel_size: VoxelSizeOption = None,
    feature_mode: FeatureModeOption = None,
    points: PointsOption = 1024,
    seed: SeedOption = 0,
):
    """Voxelize a point cloud or mesh into a sparse tensor file."""
    from ..data_io import load_point_cloud
    from ..sparse_core import save_svt
    from ..voxelizer import voxelize as voxelize_cloud

    config = resolve_voxel_config(preset, clip, voxel_size, feature_mode)
    output = output or source.with_suffix(".svt")
    echo_config(voxel=config, source=source, output=output, points=points, seed=seed)

    tensor = voxelize_cloud(load_point_cloud(source, points, seed), config)
    save_svt(tensor, output)

    print(
        f"[bold green]Success:[/] Wrote {tensor.num_active} voxels with {tensor.channels} channels on grid "
        f"{tensor.spatial_shape} to `{output}`."
    )


@app.command("gen-toy")
def gen_toy(
    output: Annotated[Path, typer.Argument(help="Directory to write the dataset to.")],
    n_per_class: Annotated[int, typer.Option("--n-per-class", help="Training clouds per class.")] = 50,
    n_test_per_class: Annotated[int, typer.Option("--n-test-per-class", help="Test clouds per class.")] = 20,
    points: Annotated[int, typer.Option("--points", help="Points per cloud.")] = 512,
    seed: SeedOption = 0,
):
    """Write the synthetic four class dataset as `.xyz` files with `train.csv` and `test.csv` manifests."""
    from ..data_io import write_manifest, write_xyz
    from ..exceptions import DataError
    from ..trainer import TOY_CLASSES, make_toy_dataset

    echo_config(output=output, n_per_class=n_per_class, n_test_per_class=n_test_per_class, points=points, seed=seed)

    splits = {
        "train": make_toy_dataset(seed, n_per_class, points),
        "test": make_toy_dataset(seed + 1, n_test_per_class, points),
    }

    for split, clouds in splits.items():
        directory = output / split
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exception:
            raise DataError(f"cannot create the directory `{directory}`: {exception}") from exception

        entries = []

        for index, (cloud, label) in enumerate(track(clouds, description=f"Writing {split}...")):
            path = directory / f"{TOY_CLASSES[label]}_{index:04d}.xyz"
            write_xyz(cloud, path)
            entries.append((path, label))

        write_manifest(entries, output / f"{split}.csv")

    print(
        f"[bold green]Success:[/] Wrote {len(splits['train'])} training and {len(splits['test'])} test clouds to "
        f"`{output}`."
    )
