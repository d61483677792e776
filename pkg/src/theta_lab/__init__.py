"""Exact computations with rank-one shifted Yangians and quantum loop algebras."""

__version__ = "0.1.0"
