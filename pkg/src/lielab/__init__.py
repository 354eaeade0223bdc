"""Computational checks of dense random generation in connected Lie groups."""

__version__ = "0.1.0"
