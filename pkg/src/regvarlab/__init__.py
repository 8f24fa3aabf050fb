"""Numerical toolkit for nonlocal operators with regularly varying kernels."""

__version__ = "0.1.0"
