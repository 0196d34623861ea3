# -*- coding: utf-8 -*-
"""Logging configuration for the package."""
import logging

from rich.logging import RichHandler

LOGGER = logging.getLogger("spikevox")

LEVELS = {-1: logging.WARNING, 0: logging.INFO, 1: logging.DEBUG}


def configure_logging(verbosity: int = 0) -> logging.Logger:
    """Attach a single ``RichHandler`` to the package logger.

    :param verbosity: ``-1`` for warnings only, ``0`` for info and ``1`` or higher for debug messages.
    """
    level = LEVELS[max(-1, min(verbosity, 1))]

    for handler in list(LOGGER.handlers):
        LOGGER.removeHandler(handler)

    handler = RichHandler(show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    LOGGER.addHandler(handler)
    LOGGER.setLevel(level)
    LOGGER.propagate = False

    return LOGGER
