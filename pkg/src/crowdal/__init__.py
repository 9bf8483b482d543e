"""Active learning with bootstrap rankers for crowd-labeled datasets."""

__version__ = "0.1.0"
