"""Exact polar-coding laboratory for classical and classical-quantum channels."""

__version__ = "0.1.0"
