"""Checking and generating semi-algebraic invariants of polynomial vector fields."""

__version__ = "0.1.0"
