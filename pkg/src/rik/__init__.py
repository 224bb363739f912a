"""Rearrangement-invariant spaces over the couple (L1, Linf) on step functions."""

__version__ = "0.1.0"
