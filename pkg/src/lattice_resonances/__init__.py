"""Resonances of one-dimensional discrete Schroedinger operators on truncated boxes."""

__version__ = "0.1.0"
