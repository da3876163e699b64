"""Blind exploration and safe manipulation of flexibly suspended objects."""

__version__ = "0.1.0"
