"""Interference-alignment feedback topologies, RVQ limited feedback and bit allocation."""

__version__ = "0.1.0"
