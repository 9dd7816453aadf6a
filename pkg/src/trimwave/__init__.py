"""Periodically trimmed random Schrodinger operators on waveguide lattices."""

__version__ = "0.1.0"
