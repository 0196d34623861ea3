# -*- coding: utf-8 -*-
"""Exceptions raised by ``spikevox``.

All exceptions derive from :class:`SpikeVoxError`. The three families :class:`ConfigError`, :class:`DataError` and
:class:`NumericError` carry the exit code that the command line interface returns when one of them reaches the top.
"""


class SpikeVoxError(Exception):
    """Base class for all exceptions of the package."""

    exit_code = 1


class ConfigError(SpikeVoxError, ValueError):
    """Invalid configuration or parameter values."""

    exit_code = 2


class DataError(SpikeVoxError, ValueError):
    """Malformed, inconsistent or missing input data."""

    exit_code = 3


class NumericError(SpikeVoxError, ArithmeticError):
    """Non-finite values or failed numerical checks."""

    exit_code = 4


class DuplicateCoordinate(DataError):
    """The same voxel coordinate appears more than once in a sparse tensor."""


class ShapeMismatch(DataError):
    """Array shapes are inconsistent with each other."""


class OutOfBounds(DataError):
    """A voxel coordinate lies outside the spatial shape of its tensor."""


class InvalidKernel(ConfigError):
    """Kernel size is not valid for the requested convolution mode."""


class InvalidStride(ConfigError):
    """Stride is not valid for the requested convolution mode."""


class ChannelMismatch(DataError):
    """Feature channels do not match the input channels of the kernel."""


class StaleRulebook(DataError):
    """A rulebook is applied to a tensor whose coordinates differ from the ones it was built from."""


class CoordMismatch(DataError):
    """Two sparse tensors that are added do not share the same coordinate set."""


class ValueOutOfRange(DataError):
    """A value lies outside of its allowed range."""


class EmptyCloud(DataError):
    """No voxel remains after clipping a point cloud."""


class EmptyFeatures(DataError):
    """A sparse tensor without active sites is passed where features are required."""


class EmptyDataset(DataError):
    """An operation requires at least one sample."""


class MalformedRow(DataError):
    """A row of a text point cloud file cannot be parsed."""

    def __init__(self, line: int, content: str = ""):
        self.line = line
        super().__init__(f"malformed row at line {line}: `{content.strip()}`")


class BadHeader(DataError):
    """A mesh file does not start with the expected header."""


class IndexOutOfRange(DataError):
    """A face references a vertex index that does not exist."""


class TruncatedFile(DataError):
    """A file ends before all declared records were read."""


class DegenerateMesh(DataError):
    """A mesh has zero total surface area."""


class FormatError(DataError):
    """A binary file has the wrong magic or an inconsistent size."""


class MissingLayerStats(DataError):
    """Firing statistics are incomplete for an energy estimate."""


class NonFiniteLoss(NumericError):
    """The training loss became NaN or infinite."""
