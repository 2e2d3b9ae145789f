"""Norm functionals: Besov (dyadic and heat characterizations), homogeneous
Sobolev, the E-norm, the heat-flow weight U, Koch-Tataru / X_lambda norms and
BMO^{-1}.

Carleson parts take the sup over dyadic radii R in [2h, L/2] and centers on a
lattice of stride R/2 (stride 1 = every grid point is available as the
refinement oracle).  Ball integrals are computed exactly on the periodic grid
by FFT convolution with the ball indicator.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._fft import irfftn, rfftn
from .dyadic import band_coefficient_mass, build_family
from .grid import (
    GridSpec,
    SpectralScalarField,
    SpectralVectorField,
    lp_norm,
    to_physical,
)
from .operators import heat_flow
from .series import HeatFlowSeries, TimeSampled
from .timegrid import TimeGrid


class NormError(ValueError):
    pass


# ---------------------------------------------------------------------------
# physical-space evaluation helpers

def _scalar_physical_abs(f: SpectralScalarField) -> np.ndarray:
    n = f.grid.n
    if f.real_valued:
        half = f.coeffs[:, :, : n // 2 + 1] * n ** 3
        return np.abs(irfftn(half, (n, n, n)))
    return np.abs(to_physical(f))


def physical_abs(f) -> np.ndarray:
    """|f(x)| on the grid (Euclidean magnitude for vector fields)."""
    if isinstance(f, SpectralVectorField):
        acc = None
        for c in f.components:
            a = _scalar_physical_abs(c)
            acc = a * a if acc is None else acc + a * a
        return np.sqrt(acc)
    return _scalar_physical_abs(f)


def sup_norm(f) -> float:
    return float(np.max(physical_abs(f)))


def band_sup(f, j, family) -> float:
    """||Delta_j f||_{L^infty}, skipping bands with no coefficient mass."""
    from .dyadic import block

    total = _coeff_mass(f)
    if total == 0 or band_coefficient_mass(f, j, family) <= 1e-28 * total:
        return 0.0
    return sup_norm(block(f, j, family))


def _coeff_mass(f) -> float:
    if isinstance(f, SpectralVectorField):
        return float(sum(np.sum(np.abs(c.coeffs) ** 2) for c in f.components))
    return float(np.sum(np.abs(f.coeffs) ** 2))


def band_lp(f, j, p, family) -> float:
    from .dyadic import block

    total = _coeff_mass(f)
    if total == 0 or band_coefficient_mass(f, j, family) <= 1e-28 * total:
        return 0.0
    if np.isinf(p):
        return sup_norm(block(f, j, family))
    return lp_norm(block(f, j, family), p)


def _lq_aggregate(values: np.ndarray, q: float) -> float:
    if np.isinf(q):
        return float(np.max(values)) if len(values) else 0.0
    return float(np.sum(values ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# Besov norms

@dataclass
class BesovReport:
    value: float
    per_band: dict
    method: str
    params: tuple
    tail_fraction: float = 0.0

    def to_dict(self):
        s, p, q = self.params
        return {
            "value": self.value,
            "method": self.method,
            "s": s,
            "p": None if np.isinf(p) else p,
            "q": None if np.isinf(q) else q,
            "per_band": {str(j): v for j, v in sorted(self.per_band.items())},
            "tail_fraction": self.tail_fraction,
        }


def besov_lp(f, s: float, p: float, q: float) -> BesovReport:
    """Dyadic characterization: l^q over bands of 2^{js} ||Delta_j f||_{L^p}."""
    if p < 1 or q < 1:
        raise NormError("p and q must lie in [1, inf]")
    fam = build_family(f.grid)
    per = {j: 2.0 ** (j * s) * band_lp(f, j, p, fam) for j in fam.bands}
    vals = np.array([per[j] for j in fam.bands])
    return BesovReport(_lq_aggregate(vals, q), per, "lp", (s, p, q))


def besov_heat(f, s: float, p: float, q: float, tg: TimeGrid) -> BesovReport:
    """Heat characterization || t^{-s/2} ||S(t)f||_{L^p} ||_{L^q(dt/t)} (s < 0)."""
    if s >= 0:
        raise NormError(f"heat characterization needs s < 0, got s={s}")
    ts = tg.times
    g = np.empty(len(ts))
    for i, t in enumerate(ts):
        ft = heat_flow(f, float(t))
        g[i] = sup_norm(ft) if np.isinf(p) else lp_norm(ft, p)
    y = ts ** (-s / 2.0) * g
    if np.isinf(q):
        value = float(np.max(y))
        tail = 0.0
    else:
        contrib = tg.weights_dlogt * y ** q
        head = y[0] ** q * 2.0 / (-s * q)  # int_0^{t_min} t^{-sq/2} dt/t, g frozen
        total = head + float(np.sum(contrib))
        last_decade = ts >= tg.t_max / 10.0
        tail = float(np.sum(contrib[last_decade]) / total) if total > 0 else 0.0
        value = total ** (1.0 / q)
    return BesovReport(value, {}, "heat", (s, p, q), tail_fraction=tail)


def sobolev_norm(f, s: float) -> float:
    """Homogeneous Sobolev norm via |k|^{2s}-weighted Parseval sums.

    The k=0 mode is excluded; a nonzero mean with s < 0 is dropped with a
    warning (the homogeneous norm is undefined on it).
    """
    grid = f.grid
    comps = f.components if isinstance(f, SpectralVectorField) else (f,)
    ksq = grid.k_sq
    mask = ksq > 0
    with np.errstate(divide="ignore"):
        w = np.where(mask, ksq, 1.0) ** s
    total = 0.0
    for c in comps:
        if s < 0 and abs(c.coeffs[0, 0, 0]) > 1e-13 * max(np.max(np.abs(c.coeffs)), 1e-300):
            warnings.warn("sobolev_norm: nonzero mean dropped for s < 0", stacklevel=2)
        total += float(np.sum(w[mask] * np.abs(c.coeffs[mask]) ** 2))
    return float(np.sqrt(grid.box_length ** 3 * total))


# ---------------------------------------------------------------------------
# E-norm

@dataclass
class ENormReport:
    value: float
    l1_term: float
    l2_term: float
    per_band_l1: dict
    per_band_l2: dict
    tail_fraction: float = 0.0

    def to_dict(self):
        return {
            "value": self.value,
            "l1_term": self.l1_term,
            "l2_term": self.l2_term,
            "per_band_l1": {str(j): v for j, v in sorted(self.per_band_l1.items())},
            "per_band_l2": {str(j): v for j, v in sorted(self.per_band_l2.items())},
            "tail_fraction": self.tail_fraction,
        }


def e_norm(g: TimeSampled) -> ENormReport:
    """||g||_{L^1(B^{-1}_{inf,1})} + sum_j 2^{-j} || ||Delta_j g(t)||_inf ||_{L^2(t dt)}."""
    fam = build_family(g.grid)
    tg = g.tgrid
    bands = list(fam.bands)
    a = np.zeros((len(tg), len(bands)))
    for i in range(len(tg)):
        gi = g.field(i)
        for bj, j in enumerate(bands):
            a[i, bj] = band_sup(gi, j, fam)
    two_mj = 2.0 ** (-np.array(bands, dtype=float))
    besov_t = a @ two_mj                       # ||g(t)||_{B^{-1}_{inf,1}} per node
    w1 = tg.weights_l1
    l1_term = float(np.dot(w1, besov_t))
    per_band_l1 = {j: float(np.dot(w1, a[:, bj])) * two_mj[bj]
                   for bj, j in enumerate(bands)}
    w2 = tg.weights_l2tdt
    band_l2 = np.sqrt(w2 @ (a ** 2))           # || ||Delta_j g||_inf ||_{L^2(t dt)}
    per_band_l2 = {j: float(two_mj[bj] * band_l2[bj]) for bj, j in enumerate(bands)}
    l2_term = float(np.sum(two_mj * band_l2))
    last = tg.times >= tg.t_max / 10.0
    denom = float(np.dot(w1, besov_t))
    tail = float(np.dot(w1[last], besov_t[last]) / denom) if denom > 0 else 0.0
    return ENormReport(l1_term + l2_term, l1_term, l2_term,
                       per_band_l1, per_band_l2, tail_fraction=tail)


# ---------------------------------------------------------------------------
# the weight U and its integral

def weight_U(u0, t: float) -> float:
    """U(t) = ||S(t)u0||_inf^2 + t ||S(t)u0||_inf^4."""
    s = sup_norm(heat_flow(u0, t))
    return s ** 2 + t * s ** 4


def weight_U_nodes(u0, tg: TimeGrid) -> np.ndarray:
    out = np.empty(len(tg))
    for i, t in enumerate(tg.times):
        out[i] = weight_U(u0, float(t))
    return out


def integral_U(u0, tg: TimeGrid, with_tail: bool = False):
    """int_0^inf U(t) dt by quadrature on the grid."""
    u = weight_U_nodes(u0, tg)
    total = tg.integrate(u)
    if not with_tail:
        return float(total)
    last = tg.times >= tg.t_max / 10.0
    tail = float(np.dot(tg.weights_l1[last], u[last]) / total) if total > 0 else 0.0
    return float(total), tail


# ---------------------------------------------------------------------------
# Carleson machinery, Koch-Tataru norm, BMO^{-1}

def dyadic_radii(grid: GridSpec) -> list:
    """Dyadic R from 2h up to L/2."""
    radii = []
    r = 2.0 * grid.spacing
    while r <= grid.box_length / 2.0 + 1e-12:
        radii.append(r)
        r *= 2.0
    return radii


_mask_fft_cache: dict = {}


def _ball_mask_fft(grid: GridSpec, radius: float) -> np.ndarray:
    key = (grid.n, grid.box_length, round(radius, 12))
    if key not in _mask_fft_cache:
        x1, x2, x3 = grid.xvec
        mask = ((x1 ** 2 + x2 ** 2 + x3 ** 2) <= radius ** 2).astype(float)
        _mask_fft_cache[key] = rfftn(mask)
    return _mask_fft_cache[key]


def ball_integral_max(grid: GridSpec, w: np.ndarray, radius: float,
                      stride: int) -> float:
    """max over stride-lattice centers x of int_{B(x,R)} w(y) dy (periodic)."""
    conv = irfftn(rfftn(w) * _ball_mask_fft(grid, radius), (grid.n,) * 3)
    conv *= grid.spacing ** 3
    sub = conv[::stride, ::stride, ::stride] if stride > 1 else conv
    return float(np.max(sub))


def _prefix_weights(tg: TimeGrid, T: float) -> np.ndarray:
    """Node weights realizing int_0^T y dt (head chunk + partial last segment)."""
    t = tg.times
    w = np.zeros(len(t))
    if T <= 0:
        return w
    if T <= t[0]:
        w[0] = T
        return w
    w[0] = t[0]
    i = int(np.searchsorted(t, T, side="right")) - 1
    dt = np.diff(t[: i + 1])
    w[:i] += 0.5 * dt
    w[1: i + 1] += 0.5 * dt
    if i < len(t) - 1 and T > t[i]:
        d = T - t[i]
        frac = d / (t[i + 1] - t[i])
        # trapezoid from t_i to T against the linear interpolant
        w[i] += 0.5 * d * (2.0 - frac)
        w[i + 1] += 0.5 * d * frac
    return w


class SliceCache:
    """Pointwise |v(t_i, .)|^2 slices for a series, built once (float32)."""

    def __init__(self, series: TimeSampled):
        self.series = series
        self.grid = series.grid
        self.tgrid = series.tgrid
        n = self.grid.n
        self.slices = np.empty((len(series), n, n, n), dtype=np.float32)
        self.sups = np.empty(len(series))
        for i in range(len(series)):
            mag = physical_abs(series.field(i))
            self.slices[i] = (mag * mag).astype(np.float32)
            self.sups[i] = float(np.max(mag))

    def weighted_sum(self, node_weights: np.ndarray) -> np.ndarray:
        nz = np.nonzero(node_weights)[0]
        n = self.grid.n
        acc = np.zeros((n, n, n))
        for i in nz:
            acc += node_weights[i] * self.slices[i]
        return acc


@dataclass
class CarlesonReport:
    value: float
    per_radius: dict

    def to_dict(self):
        return {"value": self.value,
                "per_radius": {f"{r:.6g}": v for r, v in sorted(self.per_radius.items())}}


def carleson_part(cache: SliceCache, time_factors: np.ndarray = None,
                  radii=None, stride_fraction: float = 0.5,
                  dense: bool = False) -> CarlesonReport:
    """sup over dyadic R and stride-R/2 centers of R^{-3/2} (int_{P(x,R)} |v|^2)^{1/2}."""
    grid = cache.grid
    tg = cache.tgrid
    radii = radii if radii is not None else dyadic_radii(grid)
    factors_sq = np.ones(len(tg)) if time_factors is None else time_factors ** 2
    per = {}
    for r in radii:
        w = _prefix_weights(tg, r * r) * factors_sq
        wr = cache.weighted_sum(w)
        stride = 1 if dense else max(1, int(round(stride_fraction * r / grid.spacing)))
        m = ball_integral_max(grid, wr, r, stride)
        per[r] = float(r ** -1.5 * np.sqrt(max(m, 0.0)))
    return CarlesonReport(max(per.values()) if per else 0.0, per)


@dataclass
class KochTataruReport:
    value: float
    sup_term: float
    carleson: CarlesonReport
    lam: float

    def to_dict(self):
        return {"value": self.value, "sup_term": self.sup_term,
                "lambda": self.lam, "carleson": self.carleson.to_dict()}


class KTContext:
    """Evaluate ||v||_lambda for several lambda without recomputing slices."""

    def __init__(self, series: TimeSampled, u0=None, dense: bool = False,
                 radii=None):
        self.cache = SliceCache(series)
        self.tgrid = series.tgrid
        self.dense = dense
        self.radii = radii
        if u0 is not None:
            self.cum_u = self.tgrid.cumulative(weight_U_nodes(u0, self.tgrid))
        else:
            self.cum_u = np.zeros(len(self.tgrid))

    def norm(self, lam: float) -> KochTataruReport:
        factors = np.exp(-lam * self.cum_u)
        sup_term = float(np.max(np.sqrt(self.tgrid.times) * factors * self.cache.sups))
        car = carleson_part(self.cache, time_factors=factors, dense=self.dense,
                            radii=self.radii)
        return KochTataruReport(sup_term + car.value, sup_term, car, lam)


def koch_tataru_norm(v: TimeSampled, lam: float, u0=None, dense: bool = False) -> KochTataruReport:
    """||v||_lambda: sup_t t^{1/2}||v_lam||_inf plus the Carleson part, with
    v_lam = v * exp(-lam int_0^t U); U is built from u0 (ignored when lam = 0)."""
    if lam < 0:
        raise NormError(f"lambda must be >= 0, got {lam}")
    ctx = KTContext(v, u0 if lam > 0 else None, dense=dense)
    return ctx.norm(lam)


@dataclass
class BmoReport:
    value: float
    besov_part: float
    carleson_part: float

    def to_dict(self):
        return {"value": self.value, "besov_part": self.besov_part,
                "carleson_part": self.carleson_part}


def bmo_minus1_norm(u0, tg: TimeGrid, dense: bool = False) -> BmoReport:
    """||u0||_{B^{-1}_{inf,inf}} plus the Carleson functional of S(t)u0."""
    besov = besov_lp(u0, -1.0, np.inf, np.inf).value
    cache = SliceCache(HeatFlowSeries(u0, tg))
    car = carleson_part(cache, dense=dense)
    return BmoReport(besov + car.value, besov, car.value)
