"""Computations with generalized Baumslag-Solitar groups given by labeled graphs."""

__version__ = "0.1.0"
