# -*- coding: utf-8 -*-
"""Read and write the parameter dataclasses as ``key=value`` text or YAML files."""
from __future__ import annotations

import dataclasses
import enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar, Union

import yaml

from .exceptions import ConfigError, DataError, MalformedRow
from .sparse_core import write_payload

T = TypeVar("T")

YAML_SUFFIXES = (".yaml", ".yml")
NONE_VALUES = ("", "none", "null")


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped.

    :raises MalformedRow: for a line without ``=``.
    """
    values = {}

    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        if not separator or not key.strip():
            raise MalformedRow(number, line)
        values[key.strip()] = value.strip()

    return values


def _format(value: Any) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format(item) for item in value)
    if value is None:
        return "none"
    return str(value)


def dump_key_values(mapping: Mapping[str, Any]) -> str:
    return "".join(f"{key}={_format(value)}\n" for key, value in mapping.items())


def spec_to_mapping(instance) -> Dict[str, Any]:
    """Return the fields of a parameter dataclass as plain values, enums replaced by their value."""
    mapping = {}
    for field in dataclasses.fields(instance):
        value = getattr(instance, field.name)
        mapping[field.name] = value.value if isinstance(value, enum.Enum) else value
    return mapping


def _coerce_scalar(text: str, default: Any):
    if isinstance(default, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"`{text}` is not a boolean")
        return text.lower() in ("true", "1", "yes")
    if isinstance(default, enum.Enum):
        return type(default)(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        return None if text.lower() in NONE_VALUES else float(text)
    return text


def _coerce(value: Any, default: Any):
    if not isinstance(value, str):
        return value

    if isinstance(default, tuple):
        items = [item.strip() for item in value.split(",") if item.strip()]
        element = default[0] if default else 0.0
        converted = [_coerce_scalar(item, element) for item in items]
        return converted[0] if len(converted) == 1 and len(default) != 1 else tuple(converted)

    return _coerce_scalar(value, default)


def from_mapping(cls: Type[T], mapping: Mapping[str, Any]) -> T:
    """Build the parameter dataclass ``cls`` from string or native values.

    :raises ConfigError: for an unknown key or a value that cannot be converted.
    """
    fields = {field.name: field for field in dataclasses.fields(cls)}
    unknown = set(mapping) - set(fields)

    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} for {cls.__name__}, valid keys are {sorted(fields)}")

    values = {}
    for key, value in mapping.items():
        field = fields[key]
        default = field.default if field.default is not dataclasses.MISSING else None
        try:
            values[key] = _coerce(value, default)
        except ValueError as exception:
            raise ConfigError(f"invalid value `{value}` for `{key}` of {cls.__name__}: {exception}") from exception

    return cls(**values)


def load_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping or a ``key=value`` file depending on the suffix of ``path``."""
    path = Path(path)

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exception:
        raise DataError(f"cannot read configuration `{path}`: {exception}") from exception

    if path.suffix.lower() not in YAML_SUFFIXES:
        return parse_key_values(text)

    content = yaml.safe_load(text) or {}

    if not isinstance(content, dict):
        raise ConfigError(f"the YAML configuration `{path}` must be a mapping")

    return content


def load_config(cls: Type[T], path: Union[str, Path], section: Optional[str] = None) -> T:
    """Load ``cls`` from ``path``, optionally from one top-level ``section`` of a YAML file."""
    mapping = load_mapping(path)
    if section is not None:
        mapping = mapping.get(section) or {}
    return from_mapping(cls, mapping)


def save_config(instance, path: Union[str, Path]) -> Path:
    path = Path(path)
    mapping = spec_to_mapping(instance)

    if path.suffix.lower() in YAML_SUFFIXES:
        plain = {key: list(value) if isinstance(value, tuple) else value for key, value in mapping.items()}
        write_payload(path, yaml.safe_dump(plain, sort_keys=False).encode("utf-8"))
    else:
        write_payload(path, dump_key_values(mapping).encode("utf-8"))

    return path


def load_network_spec(path: Union[str, Path]):
    from .network import NetworkSpec

    return load_config(NetworkSpec, path)
