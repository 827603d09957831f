"""Orthonormal spline systems on [0, 1]: construction, verification, experiments."""

__version__ = "0.1.0"
