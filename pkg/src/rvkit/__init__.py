"""Renormalized volumes of minimal submanifolds of hyperbolic space."""

__version__ = "0.1.0"
