# -*- coding: utf-8 -*-
# pylint: disable=cyclic-import,wrong-import-position
"""Top-level of the spikevox CLI."""
import enum
import os
import sys
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

import click
import typer
from rich import print
from rich.pretty import pprint

from ..exceptions import ConfigError, SpikeVoxError
from ..log import configure_logging

app = typer.Typer(pretty_exceptions_show_locals=False, no_args_is_help=True)


class Variant(str, enum.Enum):
    T = "T"
    S = "S"
    B = "B"
    L = "L"


SeedOption = Annotated[int, typer.Option("--seed", help="Seed of every random choice of the command.")]
ThreadsOption = Annotated[
    Optional[int], typer.Option("--threads", help="Worker threads, defaults to the number of processors.")
]
PresetOption = Annotated[str, typer.Option("--preset", help="Voxelization preset.")]
ClipOption = Annotated[
    Optional[str],
    typer.Option("--clip", help="Clip box as one half-width `0.2` or six values `xmin,ymin,zmin,xmax,ymax,zmax`."),
]
VoxelSizeOption = Annotated[
    Optional[str], typer.Option("--voxel-size", help="Voxel edge length, one value or three comma separated.")
]
FeatureModeOption = Annotated[Optional[str], typer.Option("--feature-mode", help="Per-voxel input features.")]
PointsOption = Annotated[int, typer.Option("--points", help="Points sampled from `.off` meshes.")]


@app.callback()
def callback(
    verbose: Annotated[int, typer.Option("--verbose", "-v", count=True, help="Show debug messages.")] = 0,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="Only show warnings and errors.")] = False,
):
    """
    Sparse spiking 3D convolution engine for voxelized point clouds.
    """
    configure_logging(-1 if quiet else verbose)


def parse_floats(value: str, name: str) -> List[float]:
    try:
        return [float(item) for item in value.replace(" ", "").split(",") if item]
    except ValueError as exception:
        raise ConfigError(f"`--{name}` expects comma separated numbers, got `{value}`") from exception


def resolve_voxel_config(
    preset: str = "modelnet",
    clip: Optional[str] = None,
    voxel_size: Optional[str] = None,
    feature_mode: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
):
    """Return the voxel configuration of ``preset`` updated by file ``overrides`` and then by the flags."""
    from dataclasses import replace

    from ..config import from_mapping, spec_to_mapping
    from ..voxelizer import VOXEL_PRESETS, VoxelConfig

    if preset not in VOXEL_PRESETS:
        raise ConfigError(f"unknown voxel preset `{preset}`, choose from {sorted(VOXEL_PRESETS)}")

    config = VOXEL_PRESETS[preset]

    if overrides:
        config = from_mapping(VoxelConfig, {**spec_to_mapping(config), **overrides})

    if clip is not None:
        values = parse_floats(clip, "clip")
        if len(values) == 1:
            config = replace(config, clip_min=-abs(values[0]), clip_max=abs(values[0]))
        elif len(values) == 6:
            config = replace(config, clip_min=tuple(values[:3]), clip_max=tuple(values[3:]))
        else:
            raise ConfigError(f"`--clip` expects one or six values, got {len(values)}")

    if voxel_size is not None:
        values = parse_floats(voxel_size, "voxel-size")
        if len(values) not in (1, 3):
            raise ConfigError(f"`--voxel-size` expects one or three values, got {len(values)}")
        config = replace(config, voxel_size=values[0] if len(values) == 1 else tuple(values))

    if feature_mode is not None:
        try:
            config = replace(config, feature_mode=feature_mode)
        except ValueError as exception:
            raise ConfigError(f"unknown feature mode `{feature_mode}`") from exception

    return config


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ConfigError(f"`--threads` must be at least 1, got {threads}")
    return threads


def echo_config(**sections):
    """Print the fully resolved configuration before any work starts."""
    from ..config import spec_to_mapping

    resolved = {}
    for name, value in sections.items():
        try:
            resolved[name] = spec_to_mapping(value)
        except TypeError:
            resolved[name] = str(value) if isinstance(value, Path) else value

    print("[bold blue]Info:[/] Resolved configuration:")
    pprint(resolved, expand_all=True)


def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI with ``argv`` and return the exit code instead of exiting.

    Usage errors return 2; errors of the package return the exit code of their family.
    """
    command = typer.main.get_command(app)

    try:
        code = command.main(args=argv, prog_name="spikevox", standalone_mode=False)
    except click.UsageError as exception:
        exception.show()
        return 2
    except click.exceptions.Exit as exception:
        return exception.exit_code
    except click.Abort:
        print("[bold red]Error:[/] Aborted!")
        return 1
    except SpikeVoxError as exception:
        print(f"[bold red]Error:[/] {exception}")
        return exception.exit_code

    return code if isinstance(code, int) else 0


def main():
    sys.exit(run(sys.argv[1:]))


# Import the sub commands to register them with the CLI
from . import checks, data, model  # noqa: E402,F401  pylint: disable=unused-import
