"""Unified-transform solver for linear constant-coefficient evolution problems."""

__version__ = "0.1.0"
