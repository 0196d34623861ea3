# -*- coding: utf-8 -*-
"""Sparse spiking 3D convolution engine for voxelized point clouds."""
__version__ = "0.1.0"
