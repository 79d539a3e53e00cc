"""Polar transform, split channels, code construction and polarization sets."""
