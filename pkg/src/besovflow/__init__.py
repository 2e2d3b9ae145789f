"""Pseudo-spectral toolkit for harmonic-analysis norms, oscillating and
fractal-superposed initial data, nonlinear smallness checks, and direct
Navier-Stokes integration on the periodic box."""

__version__ = "0.1.0"
