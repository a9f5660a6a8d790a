"""Trapped-ion motional heating analysis and simulation."""

__version__ = "0.1.0"
