"""Isometric embedding flows of evolving surface metrics with surface finite elements."""

__version__ = "0.1.0"
