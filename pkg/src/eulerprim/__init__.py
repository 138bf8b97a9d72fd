"""Euler characteristic of planar excursion sets and its integral identity."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
