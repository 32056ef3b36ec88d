"""Flatness-based boundary control of the linear Kawahara equation."""

__version__ = "0.1.0"
