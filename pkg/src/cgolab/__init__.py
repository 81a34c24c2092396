"""Spectral laboratory for complex geometrical optics solutions of polyharmonic operators."""

__version__ = "0.1.0"
