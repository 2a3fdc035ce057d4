"""Exact solution paths for concave-penalized least squares."""

__version__ = "0.1.0"
