"""Sequence recognition with iterative visual attention (zooming in)."""

__version__ = "0.1.0"
