"""The rescaled-superposition transform sum_J Lam f(Lam(x - x_J)) on data
supported in the unit cube Q = (-1/2, 1/2)^3, with its validation rules and
the norm (in)stability measurements built on it.

Dilation is exact index dilation m -> Lam*m in frequency space (Lam a power of
two); translation is an exact phase ramp.  "Supported in Q" is enforced as a
99.9% L^2-mass criterion.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .dyadic import dilate_field
from .grid import (
    GridSpec,
    SpectralScalarField,
    SpectralVectorField,
    lp_norm,
    physical_magnitude,
    to_physical,
)
from .norms import besov_lp, e_norm, sobolev_norm
from .operators import heat_bilinear_term, leray_project, pair_product_divergence
from .series import LazySeries
from .timegrid import TimeGrid


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class TransformSpec:
    lam: int
    centers: tuple
    delta: float

    @property
    def count(self) -> int:
        return len(self.centers)

    def to_dict(self):
        return {"lambda": self.lam,
                "centers": [list(c) for c in self.centers],
                "delta": self.delta}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["lambda"]), tuple(tuple(c) for c in d["centers"]),
                   float(d["delta"]))


@dataclass
class ValidationReport:
    ok: bool
    violations: list

    def __bool__(self):
        return self.ok


def default_centers(count: int):
    """Center sets maximizing the separation delta in the unit cube.

    Supported counts: 1 (origin), 2 (main diagonal), 4 (alternating corners),
    8 (cube corners); returns (centers, delta).
    """
    if count == 1:
        return ((0.0, 0.0, 0.0),), 0.5
    if count == 2:
        s = 0.5 / (1.0 + 2.0 * np.sqrt(3.0))       # 2*sqrt(3)*s = 1/2 - s
        return (( s,  s,  s), (-s, -s, -s)), 2.0 * np.sqrt(3.0) * s
    if count == 4:
        s = 0.5 / (1.0 + 2.0 * np.sqrt(2.0))       # 2*sqrt(2)*s = 1/2 - s
        return (( s,  s,  s), ( s, -s, -s), (-s,  s, -s), (-s, -s,  s)), \
            2.0 * np.sqrt(2.0) * s
    if count == 8:
        s = 1.0 / 6.0                               # 2s = 1/2 - s
        pts = tuple((sx * s, sy * s, sz * s)
                    for sx in (1, -1) for sy in (1, -1) for sz in (1, -1))
        return pts, 2.0 * s
    raise TransformError(f"no default center layout for K={count}; pass centers explicitly")


def make_spec(lam: int, count: int) -> TransformSpec:
    centers, delta = default_centers(count)
    return TransformSpec(lam, centers, delta)


def validate_spec(spec: TransformSpec) -> ValidationReport:
    """Check the separation conditions, Lam in 2^N, and Lam >= 4/delta."""
    v = []
    lam = spec.lam
    if lam < 1 or (lam & (lam - 1)) != 0:
        v.append(f"lambda={lam} is not a power of two")
    if spec.delta <= 0:
        v.append(f"delta={spec.delta} must be positive")
    pts = [np.asarray(c, dtype=float) for c in spec.centers]
    for i, p in enumerate(pts):
        bdist = 0.5 - np.max(np.abs(p))
        if bdist < spec.delta - 1e-12:
            v.append(f"center {i} at distance {bdist:.4g} < delta from the cube boundary")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = float(np.linalg.norm(pts[i] - pts[j]))
            if d < spec.delta - 1e-12:
                v.append(f"centers {i},{j} at distance {d:.4g} < delta={spec.delta:.4g}")
    if spec.delta > 0 and lam < 4.0 / spec.delta - 1e-9:
        v.append(f"lambda={lam} below the support-disjointness threshold "
                 f"4/delta={4.0 / spec.delta:.4g}")
    return ValidationReport(not v, v)


def mass_outside_cube(f) -> float:
    """Fraction of L^2 mass outside Q = (-1/2, 1/2)^3."""
    grid = f.grid
    if isinstance(f, SpectralVectorField):
        mag_sq = physical_magnitude(f) ** 2
    else:
        mag_sq = np.abs(to_physical(f)) ** 2
    x1, x2, x3 = grid.xvec
    inside = (np.abs(x1) < 0.5) & (np.abs(x2) < 0.5) & (np.abs(x3) < 0.5)
    total = float(np.sum(mag_sq))
    if total == 0:
        return 0.0
    return float(np.sum(mag_sq[~inside]) / total)


def _phase_sum(grid: GridSpec, centers) -> np.ndarray:
    k1, k2, k3 = grid.kvec
    acc = np.zeros((grid.n,) * 3, dtype=complex)
    for c in centers:
        acc += np.exp(-1j * (k1 * c[0] + k2 * c[1] + k3 * c[2]))
    return acc


def apply_transform(f, spec: TransformSpec, check_support: bool = True):
    """sum_J Lam f(Lam (x - x_J)), exact in frequency space.

    The separation invariants and Lam in 2^N are hard errors; a Lam below the
    4/delta disjointness threshold only warns (the transform itself is well
    defined; the quantitative lemma bounds assume the threshold).
    """
    rep = validate_spec(spec)
    hard = [m for m in rep.violations if "threshold" not in m]
    if hard:
        raise TransformError("; ".join(hard))
    if rep.violations:
        warnings.warn(rep.violations[0], stacklevel=2)
    if isinstance(f, SpectralVectorField):
        comps = tuple(apply_transform(c, spec, check_support=False)
                      for c in f.components)
        if check_support and mass_outside_cube(f) > 1e-3:
            raise TransformError(
                f"input has {mass_outside_cube(f):.2e} > 1e-3 of its L^2 mass outside Q")
        return SpectralVectorField(comps, f.divergence_free)
    if check_support and mass_outside_cube(f) > 1e-3:
        raise TransformError(
            f"input has {mass_outside_cube(f):.2e} > 1e-3 of its L^2 mass outside Q")
    dil = dilate_field(f, spec.lam)   # raises on resolvability failure
    phases = _phase_sum(f.grid, spec.centers)
    return SpectralScalarField(f.grid, spec.lam * dil.coeffs * phases, f.real_valued)


def make_q_bump(grid: GridSpec, width: float = 0.25, k_max: float = None,
                amplitude: float = 1.0) -> SpectralScalarField:
    """Band-limited Gaussian bump centered in Q: spectral Gaussian of physical
    width `width`, tapered smoothly to zero at k_max so that index dilation by
    Lam <= Nyquist/k_max stays exact."""
    if k_max is None:
        k_max = grid.dealias_cutoff / 2.0
    kmag = grid.k_mag
    env = np.exp(-((width * kmag) / 2.0) ** 2)
    s = np.clip((kmag - 0.75 * k_max) / (0.25 * k_max), 0.0, 1.0)
    taper = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
    coeffs = (env * taper).astype(complex)
    coeffs[kmag > k_max] = 0.0
    f = SpectralScalarField(grid, coeffs, real_valued=True)
    sup = lp_norm(f, np.inf)
    if sup > 0:
        f = f * (amplitude / sup)
    return f


def make_q_bump_vector(grid: GridSpec, width: float = 0.25, k_max: float = None,
                       amplitude: float = 1.0) -> SpectralVectorField:
    """Divergence-free two-component curl of a Q-supported bump stream function."""
    from .operators import derivative_vector_stream

    psi = make_q_bump(grid, width, k_max, 1.0)
    u = derivative_vector_stream(psi)
    sup = lp_norm(u, np.inf)
    if sup > 0:
        u = u * (amplitude / sup)
    return u


@dataclass
class SandwichGap:
    norm_f: float
    norm_tf: float

    @property
    def deviation(self) -> float:
        return self.norm_tf - self.norm_f


def besov_sandwich_gap(f, spec: TransformSpec, r: float) -> SandwichGap:
    """Deviation of ||T f||_{B^{-1}_{inf,r}} from ||f||_{B^{-1}_{inf,r}}."""
    tf = apply_transform(f, spec)
    return SandwichGap(besov_lp(f, -1.0, np.inf, r).value,
                       besov_lp(tf, -1.0, np.inf, r).value)


def hminus1_contraction(f, spec: TransformSpec) -> float:
    """||T f||_{H^-1} / ||f||_{H^-1}."""
    denom = sobolev_norm(f, -1.0)
    if denom == 0:
        raise TransformError("zero input: H^-1 contraction ratio undefined")
    tf = apply_transform(f, spec)
    return sobolev_norm(tf, -1.0) / denom


def bilinear_heat_series(a, b, tg: TimeGrid) -> LazySeries:
    """t -> P( S(t)a . grad S(t)b )."""
    return LazySeries(tg, a.grid, lambda t: heat_bilinear_term(a, b, t), is_vector=True)


def bilinear_stability_gap(f, g, spec: TransformSpec, tg: TimeGrid) -> float:
    """E-norm(transformed bilinear term) minus E-norm(original)."""
    tf = apply_transform(f, spec)
    tgf = apply_transform(g, spec)
    e_t = e_norm(bilinear_heat_series(tf, tgf, tg)).value
    e_0 = e_norm(bilinear_heat_series(f, g, tg)).value
    return e_t - e_0


def cross_interaction(u_fields) -> SpectralVectorField:
    """-P sum_{J != J'} u_J . grad u_{J'} at one time, via the polarization
    sum_{J!=J'} u_J (x) u_{J'} = U (x) U - sum_J u_J (x) u_J with U = sum u_J."""
    total = u_fields[0]
    for u in u_fields[1:]:
        total = total + u
    acc = pair_product_divergence(total, total, project=False)
    for u in u_fields:
        acc = acc - pair_product_divergence(u, u, project=False)
    return leray_project(acc) * (-1.0)


def cross_interaction_norm(u_list, spec: TransformSpec, tg: TimeGrid) -> float:
    """|| F ||_{L^2(H^{-1/2})} of the cross-interaction forcing of per-center flows.

    u_list holds one time-sampled flow per center, already on the shared grid
    and TimeGrid (K=1 gives exactly 0: the sum is empty).
    """
    if len(u_list) != spec.count:
        raise TransformError(f"need one flow per center: {len(u_list)} != {spec.count}")
    if spec.count == 1:
        return 0.0
    for u in u_list[1:]:
        if not np.array_equal(u.tgrid.times, u_list[0].tgrid.times):
            raise TransformError("per-center flows on different time grids")
        if u.grid != u_list[0].grid:
            raise TransformError("per-center flows on different grids")
    vals = np.empty(len(tg))
    for i in range(len(tg)):
        F = cross_interaction([u.field(i) for u in u_list])
        vals[i] = sobolev_norm(F, -0.5) ** 2
    return float(np.sqrt(tg.integrate(vals)))
