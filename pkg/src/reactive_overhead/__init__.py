"""Analytical and simulated routing overhead of reactive MANET protocols."""

__version__ = "0.1.0"
