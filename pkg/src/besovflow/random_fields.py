"""Seeded random band-limited fields for probes and tests."""

import numpy as np

from .grid import GridSpec, SpectralScalarField, SpectralVectorField, from_physical
from .operators import leray_project


def random_scalar(grid: GridSpec, rng: np.random.Generator, k_lo: float = 0.0,
                  k_hi: float = None, decay: float = 0.0,
                  amplitude: float = 1.0) -> SpectralScalarField:
    """Real random field with spectrum restricted to k_lo < |k| <= k_hi.

    decay > 0 multiplies the spectrum by |k|^{-decay} (normalized at k_lo+1).
    """
    if k_hi is None:
        k_hi = grid.dealias_cutoff
    noise = rng.standard_normal((grid.n,) * 3)
    f = from_physical(grid, noise)
    kmag = grid.k_mag
    env = ((kmag > k_lo) & (kmag <= k_hi)).astype(float)
    if decay > 0:
        with np.errstate(divide="ignore"):
            env = env * np.where(kmag > 0, kmag, 1.0) ** (-decay)
    coeffs = f.coeffs * env
    coeffs[0, 0, 0] = 0.0
    m = np.max(np.abs(coeffs))
    if m > 0:
        coeffs *= amplitude / m
    return SpectralScalarField(grid, coeffs, real_valued=True)


def random_band_scalar(grid: GridSpec, rng: np.random.Generator, j: int,
                       amplitude: float = 1.0) -> SpectralScalarField:
    """Random real field supported in the dyadic band j (annulus (2^j, 2^{j+1}])."""
    return random_scalar(grid, rng, k_lo=2.0 ** j, k_hi=2.0 ** (j + 1),
                         amplitude=amplitude)


def random_divfree(grid: GridSpec, rng: np.random.Generator, k_lo: float = 0.0,
                   k_hi: float = None, decay: float = 0.0,
                   amplitude: float = 1.0) -> SpectralVectorField:
    """Random divergence-free vector field, Leray projection of component noise."""
    comps = tuple(random_scalar(grid, rng, k_lo, k_hi, decay) for _ in range(3))
    u = leray_project(SpectralVectorField(comps))
    sup = max(np.max(np.abs(c.coeffs)) for c in u.components)
    if sup > 0:
        u = u * (amplitude / sup)
    return u
