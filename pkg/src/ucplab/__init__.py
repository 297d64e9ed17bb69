"""Numerical laboratory for sampling inequalities of Schrodinger operators.

Builds equidistributed ball masks, discretised operators H = -Laplace + V,
eigenfunctions, spectral projectors and Weyl iterates, and compares the
mass they keep on the mask with the closed-form lower bounds.
"""
__version__ = "0.1.0"

from .errors import UcpError  # noqa: F401
