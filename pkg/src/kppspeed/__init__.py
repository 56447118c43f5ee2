"""Spreading speeds of 1-D heterogeneous KPP fronts."""

__version__ = "0.1.0"
