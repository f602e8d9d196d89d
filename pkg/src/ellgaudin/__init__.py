"""Lax pairs, Hamiltonians and identity checks for elliptic Gaudin-type models."""

__version__ = "0.1.0"
