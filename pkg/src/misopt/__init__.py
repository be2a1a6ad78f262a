"""Movable-intelligent-surface link simulation and design optimization."""

__version__ = "0.1.0"
