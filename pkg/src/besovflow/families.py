"""Oscillating initial-data families: the scalar e^{i x3/eps} family, the
large two-component curl family built from it, and its viscosity rescaling.

Resolvability policy: the carrier 1/eps must sit on the wavenumber lattice,
keep at least 4 grid points per oscillation period (1/eps <= k_Nyquist / 2,
and likewise for the envelope contraction 1/eps^alpha), and the constructed
field must keep all but a 1e-4 fraction of its spectral mass inside the
dealias cutoff so that quadratic products stay alias-free.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import GridSpec, SpectralScalarField, SpectralVectorField, from_physical, zero_field
from .operators import derivative


class FamilyError(ValueError):
    pass


def gaussian_profile(x1, x2, x3):
    """Default Schwartz profile phi(x) = exp(-(x1^2 + x2^2 + x3^2))."""
    return np.exp(-(x1 ** 2 + x2 ** 2 + x3 ** 2))


def scaled_profile(scale: float):
    def prof(x1, x2, x3):
        return scale * gaussian_profile(x1, x2, x3)

    prof.scale = scale
    return prof


DEFAULT_ALPHA = 0.5
DEFAULT_EPS_SWEEP = tuple(2.0 ** -q for q in range(2, 8))


@dataclass
class FamilyParams:
    epsilon: float
    alpha: float = DEFAULT_ALPHA
    profile: callable = dc_field(default=gaussian_profile)
    grid: GridSpec = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise FamilyError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if not 0 < self.alpha < 1:
            raise FamilyError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.grid is None:
            raise FamilyError("FamilyParams needs a grid")
        ok, why = resolvable(self.grid, self.epsilon, self.alpha)
        if not ok:
            raise FamilyError(f"unresolvable oscillation: {why}")


def resolvable(grid: GridSpec, epsilon: float, alpha: float):
    """Check the oscillation/envelope resolvability rules; returns (ok, reason)."""
    carrier = 1.0 / epsilon
    m3 = carrier * grid.box_length / (2.0 * np.pi)
    if abs(m3 - round(m3)) > 1e-9:
        return False, (f"carrier 1/eps = {carrier:g} is not on the wavenumber "
                       f"lattice (index {m3:g})")
    if carrier > grid.k_nyquist / 2.0 + 1e-12:
        return False, (f"fewer than 4 grid points per oscillation: 1/eps = {carrier:g} "
                       f"> k_Nyquist/2 = {grid.k_nyquist / 2:g}")
    if epsilon ** -alpha > grid.k_nyquist / 2.0 + 1e-12:
        return False, (f"envelope contraction 1/eps^alpha = {epsilon ** -alpha:g} "
                       f"> k_Nyquist/2 = {grid.k_nyquist / 2:g}")
    return True, ""


def resolvable_epsilons(grid: GridSpec, eps_list, alpha: float = DEFAULT_ALPHA,
                        warn: bool = True):
    """Clip a sweep to the resolvable subset (with a warning listing the clipped)."""
    kept, clipped = [], []
    for e in eps_list:
        (kept if resolvable(grid, e, alpha)[0] else clipped).append(e)
    if clipped and warn:
        warnings.warn(
            f"clipped unresolvable epsilons {clipped} on n={grid.n}, "
            f"L={grid.box_length:g}", stacklevel=2)
    return kept, clipped


def _out_of_band_fraction(f: SpectralScalarField) -> float:
    mass = np.abs(f.coeffs) ** 2
    total = float(np.sum(mass))
    if total == 0:
        return 0.0
    return float(np.sum(mass[~f.grid.dealias_mask]) / total)


def make_f_eps(f_profile, params: FamilyParams, real: bool = False) -> SpectralScalarField:
    """f_eps(x) = e^{i x3 / eps} f(x1, x2 / eps^alpha, x3) (cosine variant if real)."""
    g = params.grid
    x1, x2, x3 = g.xvec
    eps, al = params.epsilon, params.alpha
    envelope = f_profile(x1, x2 * eps ** -al, x3)
    carrier = np.cos(x3 / eps) if real else np.exp(1j * x3 / eps)
    f = from_physical(g, carrier * envelope, real_valued=real)
    oob = _out_of_band_fraction(f)
    if oob > 1e-4:
        raise FamilyError(
            f"unresolvable oscillation: {oob:.2e} of spectral mass beyond the "
            f"dealias cutoff (eps={eps:g}, alpha={al:g}, n={g.n})")
    return f


def make_theorem2_data(params: FamilyParams) -> SpectralVectorField:
    """Two-component curl datum (d2 phi_eps, -d1 phi_eps, 0) with
    phi_eps = (-log eps)^{1/5} eps^{-(1-alpha)} cos(x3/eps) phi(x1, x2/eps^alpha, x3).
    """
    eps, al = params.epsilon, params.alpha
    amp = (-np.log(eps)) ** 0.2 * eps ** -(1.0 - al)
    stream = make_f_eps(params.profile, params, real=True) * amp
    u1 = derivative(stream, 2)
    u2 = derivative(stream, 1) * (-1.0)
    return SpectralVectorField((u1, u2, zero_field(params.grid)), divergence_free=True)


def make_reynolds_data(nu: float, alpha: float, profile, grid: GridSpec) -> SpectralVectorField:
    """Viscosity-rescaled datum v_{0,nu} = nu * u_{0,eps=nu}: equal to
    (-log nu)^{1/5} cos(x3/nu) ((d2 phi)(x1, x2/nu^a, x3), nu^a (-d1 phi)(...), 0).
    """
    params = FamilyParams(epsilon=nu, alpha=alpha, profile=profile, grid=grid)
    return make_theorem2_data(params) * nu


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log y vs log x with a 2-sigma half-width.

    Returns (slope, halfwidth); slope is nan for degenerate sweeps.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    xs, ys = xs[keep], ys[keep]
    if len(xs) < 2:
        return float("nan"), float("nan")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    if len(xs) == 2:
        return slope, float("inf")
    dof = len(xs) - 2
    sigma2 = float(res[0]) / dof if len(res) else 0.0
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    half = 2.0 * np.sqrt(sigma2 / sxx) if sxx > 0 else float("inf")
    return slope, half
