"""Dyadic (Littlewood-Paley) frequency decomposition on the resolved annulus.

The lowpass symbol is radial, identically 1 on |xi| <= 1 and 0 beyond
|xi| = 2, with a C^2 quintic ramp in between; band j applies
psi_j(|k|) = lowpass(2^{-j-1}|k|) - lowpass(2^{-j}|k|), so that every band is
an exact dyadic dilate of band 0 and partial sums telescope exactly.
"""

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, SpectralScalarField, SpectralVectorField


class BandError(ValueError):
    pass


def lowpass_profile(xi: np.ndarray) -> np.ndarray:
    """Radial lowpass symbol: 1 on [0,1], 0 on [2,inf), C^2 quintic ramp between."""
    xi = np.asarray(xi, dtype=float)
    s = np.clip(xi - 1.0, 0.0, 1.0)
    ramp = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
    return np.where(xi <= 1.0, 1.0, np.where(xi > 2.0, 0.0, ramp))


def band_profile(xi: np.ndarray) -> np.ndarray:
    """psi_0: supported on 1 < |xi| <= 4, equal to the telescoped difference."""
    return lowpass_profile(xi / 2.0) - lowpass_profile(xi)


@dataclass
class DyadicFamily:
    """Sampled dyadic multipliers for one grid."""

    grid: GridSpec
    j_min: int
    j_max: int
    multipliers: dict    # j -> psi_j(|k|) on the grid
    lowpass: dict        # j -> lowpass(2^{-j}|k|) on the grid

    @property
    def bands(self):
        return range(self.j_min, self.j_max + 1)

    def require(self, j: int):
        if j < self.j_min or j > self.j_max:
            raise BandError(f"band {j} outside family range [{self.j_min}, {self.j_max}]")


_family_cache: dict = {}


def build_family(grid: GridSpec) -> DyadicFamily:
    """Band range: j_min = ceil(log2(2 pi / L)) - 1, j_max = floor(log2 k_cutoff)."""
    key = (grid.n, grid.box_length, grid.dealias_fraction)
    if key in _family_cache:
        return _family_cache[key]
    j_min = int(np.ceil(np.log2(2.0 * np.pi / grid.box_length))) - 1
    j_max = int(np.floor(np.log2(grid.dealias_cutoff)))
    if j_max - j_min + 1 < 4:
        raise BandError(
            f"grid resolves only {j_max - j_min + 1} dyadic bands, need >= 4")
    kmag = grid.k_mag
    mult = {j: band_profile(kmag / 2.0 ** j) for j in range(j_min, j_max + 1)}
    low = {j: lowpass_profile(kmag / 2.0 ** j) for j in range(j_min, j_max + 1)}
    fam = DyadicFamily(grid, j_min, j_max, mult, low)
    _family_cache[key] = fam
    return fam


def block(f, j: int, family: DyadicFamily = None):
    """Delta_j f: multiply coefficients by psi_j(|k|)."""
    if isinstance(f, SpectralVectorField):
        return SpectralVectorField(tuple(block(c, j, family) for c in f.components),
                                   f.divergence_free)
    fam = family or build_family(f.grid)
    fam.require(j)
    return SpectralScalarField(f.grid, f.coeffs * fam.multipliers[j], f.real_valued)


def lowpass(f, j: int, family: DyadicFamily = None):
    """S_j f: multiply coefficients by lowpass(2^{-j}|k|)."""
    if isinstance(f, SpectralVectorField):
        return SpectralVectorField(tuple(lowpass(c, j, family) for c in f.components),
                                   f.divergence_free)
    fam = family or build_family(f.grid)
    fam.require(j)
    return SpectralScalarField(f.grid, f.coeffs * fam.lowpass[j], f.real_valued)


def band_coefficient_mass(f, j: int, family: DyadicFamily = None) -> float:
    """l^2 mass of the band-j coefficients (cheap emptiness check, no FFT)."""
    fam = family or build_family(f.grid if isinstance(f, SpectralVectorField) else f.grid)
    fam.require(j)
    m = fam.multipliers[j]
    if isinstance(f, SpectralVectorField):
        return float(sum(np.sum((m * np.abs(c.coeffs)) ** 2) for c in f.components))
    return float(np.sum((m * np.abs(f.coeffs)) ** 2))


def dilate_field(f: SpectralScalarField, lam: int) -> SpectralScalarField:
    """f(lam .) on the same grid via index dilation m -> lam*m (lam a power of two).

    Exact when the occupied modes satisfy lam*|m| < n/2; raises otherwise.
    """
    n = f.grid.n
    if lam < 1 or (lam & (lam - 1)) != 0:
        raise BandError(f"dilation factor must be a power of two, got {lam}")
    if lam == 1:
        return f.copy()
    half = n // 2
    m = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    occ = np.abs(f.coeffs) > 1e-13 * max(np.max(np.abs(f.coeffs)), 1e-300)
    if occ.any():
        mm = np.abs(m)
        attained = max(mm[occ.any(axis=(1, 2))].max(initial=0),
                       mm[occ.any(axis=(0, 2))].max(initial=0),
                       mm[occ.any(axis=(0, 1))].max(initial=0))
        if lam * attained >= half:
            raise BandError(
                f"dilation by {lam} overflows the grid: occupied index {attained}, "
                f"need < {half // lam}")
    out = np.zeros_like(f.coeffs)
    keep = np.abs(m) < half // lam + (half % lam == 0)
    src = m[keep]
    dst = (lam * src) % n
    out[np.ix_(dst, dst, dst)] = f.coeffs[np.ix_(src % n, src % n, src % n)]
    return SpectralScalarField(f.grid, out, f.real_valued)
