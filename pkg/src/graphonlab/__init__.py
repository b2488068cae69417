"""Numerical toolkit for sparse graph limits in L^p."""

__version__ = "0.1.0"
