# -*- coding: utf-8 -*-
"""Tests for the :mod:`spikevox.config` module."""
import pytest

from spikevox.config import (
    dump_key_values,
    from_mapping,
    load_config,
    load_mapping,
    parse_key_values,
    save_config,
    spec_to_mapping,
)
from spikevox.exceptions import ConfigError, DataError, MalformedRow
from spikevox.network import NetworkSpec
from spikevox.trainer import TrainConfig
from spikevox.voxelizer import FeatureMode, VoxelConfig


def test_parse_key_values():
    text = "# header\nlr = 0.01\n\nepochs=3  # inline\n"
    assert parse_key_values(text) == {"lr": "0.01", "epochs": "3"}


def test_parse_key_values_malformed():
    with pytest.raises(MalformedRow) as exception:
        parse_key_values("lr=0.1\nepochs\n")

    assert exception.value.line == 2


def test_from_mapping_coercion():
    config = from_mapping(TrainConfig, {"lr": "0.5", "epochs": "3", "optimizer": "adam", "max_grad_norm": "none"})

    assert config.lr == 0.5
    assert config.epochs == 3
    assert config.optimizer == "adam"
    assert config.max_grad_norm is None


def test_from_mapping_tuples_and_enums():
    voxel = from_mapping(VoxelConfig, {"voxel_size": "0.05", "clip_min": "-1,-1,-1", "feature_mode": "occupancy"})

    assert voxel.voxel_size == (0.05, 0.05, 0.05)
    assert voxel.clip_min == (-1.0, -1.0, -1.0)
    assert voxel.feature_mode is FeatureMode.OCCUPANCY

    spec = from_mapping(NetworkSpec, {"channels_per_stage": "8,8,16,16", "timesteps": "2"})
    assert spec.channels_per_stage == (8, 8, 16, 16)
    assert spec.timesteps == 2


def test_from_mapping_native_values():
    spec = from_mapping(NetworkSpec, {"blocks_per_stage": [2, 2, 2, 2], "beta": 0.25})
    assert spec.blocks_per_stage == (2, 2, 2, 2)
    assert spec.beta == 0.25


@pytest.mark.parametrize("mapping", ({"learning_rate": "0.1"}, {"epochs": "many"}))
def test_from_mapping_invalid(mapping):
    with pytest.raises(ConfigError):
        from_mapping(TrainConfig, mapping)


def test_dump_key_values():
    text = dump_key_values({"channels": (1, 2), "mode": FeatureMode.OCCUPANCY, "norm": None, "lr": 0.5})
    assert text == "channels=1,2\nmode=occupancy\nnorm=none\nlr=0.5\n"


@pytest.mark.parametrize("suffix", (".cfg", ".yaml"))
def test_save_and_load_config(tmp_path, small_spec, suffix):
    path = save_config(small_spec, tmp_path / f"network{suffix}")
    assert load_config(NetworkSpec, path) == small_spec
    assert spec_to_mapping(load_config(NetworkSpec, path)) == spec_to_mapping(small_spec)


def test_load_config_section(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("train:\n  lr: 0.05\n  epochs: 2\nnetwork:\n  timesteps: 2\n")

    assert load_config(TrainConfig, path, "train").lr == 0.05
    assert load_config(NetworkSpec, path, "network").timesteps == 2
    assert load_config(VoxelConfig, path, "voxel") == VoxelConfig()


def test_load_mapping_errors(tmp_path):
    with pytest.raises(DataError):
        load_mapping(tmp_path / "missing.cfg")

    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")

    with pytest.raises(ConfigError):
        load_mapping(path)


def test_save_config_missing_directory(tmp_path):
    with pytest.raises(DataError, match="cannot write"):
        save_config(VoxelConfig(), tmp_path / "missing" / "voxel.cfg")
