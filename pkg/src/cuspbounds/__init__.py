"""Empirical verification of derivative bounds for Coulombic many-body eigenfunctions."""

__version__ = "0.1.0"
