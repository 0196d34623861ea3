# -*- coding: utf-8 -*-
"""Module for the command line interface."""
from .main import app, main, run

__all__ = ("app", "main", "run")
