"""Numerics for Bogoliubov theory of the two-dimensional Bose gas."""

__version__ = "0.1.0"
