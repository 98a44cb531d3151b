"""Symbolic and numerical toolkit for the curvature of the asymmetric noncommutative torus."""

__version__ = "0.1.0"
