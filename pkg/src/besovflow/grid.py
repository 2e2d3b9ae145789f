"""Periodic-box discretization: grids, spectral fields, transforms, products.

The box is [-L/2, L/2)^3 with n samples per axis, stored in FFT index order
(sample 0 sits at the origin, the negative half-box occupies the upper
indices).  A scalar field is a cube of Fourier coefficients c_m with

    f(x) = sum_m c_m exp(i k_m . x),    k_m = (2 pi / L) m,

m ranging over [-n/2, n/2)^3 in numpy fft order.  With this normalization
Parseval reads ||f||_L2^2 = L^3 sum |c_m|^2.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ._fft import fftn, ifftn


class GridError(ValueError):
    pass


class GridMismatchError(GridError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class GridSpec:
    """Cubic periodic grid: n points per axis on a box of side box_length.

    dealias_fraction sets the radial spectral cutoff k_c = fraction * k_Nyquist;
    coefficients with |k| > k_c are zeroed after every nonlinear product.
    """

    def __init__(self, n: int, box_length: float = 2.0 * np.pi,
                 dealias_fraction: float = 2.0 / 3.0):
        if not _is_power_of_two(n) or n < 16:
            raise GridError(f"n must be a power of two >= 16, got {n}")
        if box_length <= 0:
            raise GridError(f"box_length must be positive, got {box_length}")
        if not 0 < dealias_fraction <= 1:
            raise GridError(f"dealias_fraction must lie in (0, 1], got {dealias_fraction}")
        self.n = int(n)
        self.box_length = float(box_length)
        self.dealias_fraction = float(dealias_fraction)

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.n / self.box_length

    @property
    def dealias_cutoff(self) -> float:
        return self.dealias_fraction * self.k_nyquist

    @cached_property
    def k1d(self) -> np.ndarray:
        """Signed wavenumbers along one axis, fft order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.box_length

    @cached_property
    def kvec(self):
        """Sparse (broadcastable) wavevector components (k1, k2, k3)."""
        k = self.k1d
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k_sq(self) -> np.ndarray:
        k1, k2, k3 = self.kvec
        return k1 ** 2 + k2 ** 2 + k3 ** 2

    @cached_property
    def k_mag(self) -> np.ndarray:
        return np.sqrt(self.k_sq)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.k_mag <= self.dealias_cutoff + 1e-12

    @cached_property
    def x1d(self) -> np.ndarray:
        """Signed sample coordinates along one axis, matching sample index order."""
        return self.spacing * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def xvec(self):
        x = self.x1d
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def __eq__(self, other):
        return (isinstance(other, GridSpec) and self.n == other.n
                and self.box_length == other.box_length
                and self.dealias_fraction == other.dealias_fraction)

    def __hash__(self):
        return hash((self.n, self.box_length, self.dealias_fraction))

    def __repr__(self):
        return (f"GridSpec(n={self.n}, box_length={self.box_length:g}, "
                f"dealias_fraction={self.dealias_fraction:g})")


@dataclass
class SpectralScalarField:
    """Complex Fourier coefficients of a scalar function on the box."""

    grid: GridSpec
    coeffs: np.ndarray
    real_valued: bool = False

    def __post_init__(self):
        n = self.grid.n
        if self.coeffs.shape != (n, n, n):
            raise GridError(f"coefficient cube shape {self.coeffs.shape} != grid n={n}")

    def copy(self) -> "SpectralScalarField":
        return SpectralScalarField(self.grid, self.coeffs.copy(), self.real_valued)

    def __add__(self, other):
        _require_same_grid(self, other)
        return SpectralScalarField(self.grid, self.coeffs + other.coeffs,
                                   self.real_valued and other.real_valued)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return SpectralScalarField(self.grid, self.coeffs - other.coeffs,
                                   self.real_valued and other.real_valued)

    def __mul__(self, scalar):
        real = self.real_valued and not isinstance(scalar, complex)
        return SpectralScalarField(self.grid, self.coeffs * scalar, real)

    __rmul__ = __mul__


@dataclass
class SpectralVectorField:
    """Three scalar components on a shared grid."""

    components: tuple
    divergence_free: bool = False

    def __post_init__(self):
        if len(self.components) != 3:
            raise GridError("vector field needs exactly 3 components")
        g = self.components[0].grid
        for c in self.components[1:]:
            if c.grid != g:
                raise GridMismatchError("vector components on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    def copy(self) -> "SpectralVectorField":
        return SpectralVectorField(tuple(c.copy() for c in self.components),
                                   self.divergence_free)

    def __add__(self, other):
        return SpectralVectorField(
            tuple(a + b for a, b in zip(self.components, other.components)),
            self.divergence_free and other.divergence_free)

    def __sub__(self, other):
        return SpectralVectorField(
            tuple(a - b for a, b in zip(self.components, other.components)),
            self.divergence_free and other.divergence_free)

    def __mul__(self, scalar):
        return SpectralVectorField(tuple(c * scalar for c in self.components),
                                   self.divergence_free)

    __rmul__ = __mul__


def _require_same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")


def from_physical(grid: GridSpec, samples: np.ndarray, real_valued=None) -> SpectralScalarField:
    """Build a field from physical samples in box index order."""
    if samples.shape != (grid.n,) * 3:
        raise GridError(f"sample cube shape {samples.shape} != grid n={grid.n}")
    if real_valued is None:
        real_valued = not np.iscomplexobj(samples)
    coeffs = fftn(samples) / grid.n ** 3
    return SpectralScalarField(grid, coeffs, real_valued)


def to_physical(f: SpectralScalarField) -> np.ndarray:
    """Inverse transform to samples on the n^3 grid (complex array)."""
    return ifftn(f.coeffs) * f.grid.n ** 3


def to_spectral(grid: GridSpec, samples: np.ndarray) -> SpectralScalarField:
    return from_physical(grid, samples)


def derivative(f: SpectralScalarField, axis: int) -> SpectralScalarField:
    """Spectral partial derivative along axis 1, 2 or 3."""
    if axis not in (1, 2, 3):
        raise GridError(f"axis must be 1, 2 or 3, got {axis}")
    k = f.grid.kvec[axis - 1]
    return SpectralScalarField(f.grid, 1j * k * f.coeffs, f.real_valued)


def dealias(f: SpectralScalarField) -> SpectralScalarField:
    return SpectralScalarField(f.grid, f.coeffs * f.grid.dealias_mask, f.real_valued)


def dealiased_product(f: SpectralScalarField, g: SpectralScalarField) -> SpectralScalarField:
    """Pointwise physical product with radial 2/3-rule dealiasing."""
    _require_same_grid(f, g)
    prod = to_physical(f) * to_physical(g)
    out = from_physical(f.grid, prod, real_valued=f.real_valued and g.real_valued)
    return dealias(out)


def zero_field(grid: GridSpec, real_valued: bool = True) -> SpectralScalarField:
    return SpectralScalarField(grid, np.zeros((grid.n,) * 3, dtype=complex), real_valued)


def zero_vector(grid: GridSpec) -> SpectralVectorField:
    return SpectralVectorField(tuple(zero_field(grid) for _ in range(3)),
                               divergence_free=True)


def vector_from_physical(grid: GridSpec, samples3) -> SpectralVectorField:
    return SpectralVectorField(tuple(from_physical(grid, s) for s in samples3))


def vector_to_physical(u: SpectralVectorField) -> list:
    return [to_physical(c) for c in u.components]


def physical_magnitude(u: SpectralVectorField) -> np.ndarray:
    """Pointwise Euclidean magnitude |u(x)| on the grid."""
    mag_sq = None
    for c in u.components:
        p = to_physical(c)
        m = p.real ** 2 + p.imag ** 2
        mag_sq = m if mag_sq is None else mag_sq + m
    return np.sqrt(mag_sq)


def divergence(u: SpectralVectorField) -> SpectralScalarField:
    g = u.grid
    out = np.zeros((g.n,) * 3, dtype=complex)
    for axis in range(3):
        out += 1j * g.kvec[axis] * u.components[axis].coeffs
    return SpectralScalarField(g, out, u.components[0].real_valued)


def max_divergence(u: SpectralVectorField) -> float:
    """max_k |k . u_hat(k)|, the spectral divergence residual."""
    return float(np.max(np.abs(divergence(u).coeffs)))


def coeff_sup(u) -> float:
    if isinstance(u, SpectralVectorField):
        return max(float(np.max(np.abs(c.coeffs))) for c in u.components)
    return float(np.max(np.abs(u.coeffs)))


def lp_norm(f, p: float) -> float:
    """Grid L^p norm; uniform-weight rule for p < inf, max over samples for p = inf.

    Accepts a scalar field, a vector field (pointwise Euclidean magnitude), or a
    real sample cube.
    """
    if isinstance(f, SpectralVectorField):
        mag = physical_magnitude(f)
    elif isinstance(f, SpectralScalarField):
        mag = np.abs(to_physical(f))
    else:
        mag = np.abs(f)
    if np.isinf(p):
        return float(np.max(mag))
    h3 = f.grid.spacing ** 3 if hasattr(f, "grid") else 1.0
    return float((h3 * np.sum(mag ** p)) ** (1.0 / p))


def l2_norm_spectral(f) -> float:
    """L^2 norm via Parseval (no transform needed)."""
    if isinstance(f, SpectralVectorField):
        s = sum(np.sum(np.abs(c.coeffs) ** 2) for c in f.components)
        return float(np.sqrt(f.grid.box_length ** 3 * s))
    return float(np.sqrt(f.grid.box_length ** 3 * np.sum(np.abs(f.coeffs) ** 2)))


def hermitian_defect(f: SpectralScalarField) -> float:
    """Relative deviation of coeffs from Hermitian symmetry c(-m) = conj(c(m))."""
    n = f.grid.n
    neg = (-np.arange(n)) % n
    flipped = f.coeffs[np.ix_(neg, neg, neg)]
    num = float(np.max(np.abs(flipped.conj() - f.coeffs)))
    den = float(np.max(np.abs(f.coeffs)))
    return num / den if den > 0 else 0.0


def embed_compact(grid: GridSpec, samples: np.ndarray, center=(0.0, 0.0, 0.0)) -> SpectralScalarField:
    """Embed samples on an axis-aligned subcube into the periodic box.

    The subcube samples must share the box grid spacing (m^3 cube, side m*h,
    centered at `center`); the field is zero outside up to spectral ringing.
    Requires the box to leave a margin of at least one subcube side.
    """
    m = samples.shape[0]
    if samples.shape != (m, m, m):
        raise GridError("subcube samples must form a cube")
    side = m * grid.spacing
    if grid.box_length - side < side:
        raise GridError(
            f"subcube side {side:g} too large for box {grid.box_length:g} "
            f"(margin must be >= subcube side)")
    full = np.zeros((grid.n,) * 3, dtype=samples.dtype)
    idx = []
    for ax in range(3):
        # sample index of the subcube's low corner, rounded onto the box lattice
        start = int(np.round(center[ax] / grid.spacing)) - m // 2
        idx.append((np.arange(start, start + m)) % grid.n)
    full[np.ix_(*idx)] = samples
    return from_physical(grid, full)
