"""Sieve estimation for ordinal panel count data."""

__version__ = "0.1.0"
