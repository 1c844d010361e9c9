"""Grouping co-located devices by the light they observe."""

__version__ = "0.1.0"
