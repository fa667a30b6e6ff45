"""Numerical toolkit for the sigma_k geodesic equation on a conformal class."""

__version__ = "0.1.0"
