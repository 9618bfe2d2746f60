"""Compressed n-gram indexes and Kneser-Ney estimation."""

__version__ = "0.1.0"

import warnings as _w

_w.filterwarnings("ignore", message=".*TBB.*")
