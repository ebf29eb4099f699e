"""Logical-channel compilation for open-system simulation with partial error correction."""

__version__ = "0.1.0"
