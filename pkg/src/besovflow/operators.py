"""Heat semigroup, Leray projector, and the Navier-Stokes nonlinearity.

All three are exact Fourier multipliers / dealiased spectral products on the
periodic box.  The nonlinearity is assembled in divergence form
sum_l d_l (u^l u), valid for divergence-free u and discretely
momentum-conserving; the convective form u . grad u is kept as a test oracle.
"""

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    SpectralScalarField,
    SpectralVectorField,
    coeff_sup,
    dealias,
    dealiased_product,
    derivative,
    from_physical,
    max_divergence,
    to_physical,
)


class OperatorError(ValueError):
    pass


@dataclass
class HeatFlowSample:
    """A field together with the heat time that produced it."""

    t: float
    field: object


def heat_multiplier(grid: GridSpec, t: float) -> np.ndarray:
    return np.exp(-t * grid.k_sq)


def heat_flow(f, t: float):
    """Apply S(t) = exp(t Laplacian): multiply each coefficient by e^{-t|k|^2}."""
    if t < 0:
        raise OperatorError(f"heat flow needs t >= 0, got {t}")
    if isinstance(f, SpectralVectorField):
        return SpectralVectorField(tuple(heat_flow(c, t) for c in f.components),
                                   f.divergence_free)
    mult = heat_multiplier(f.grid, t)
    return SpectralScalarField(f.grid, f.coeffs * mult, f.real_valued)


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    """P = Id - grad laplacian^{-1} div; the k=0 mode is left unchanged."""
    g = v.grid
    k = g.kvec
    ksq = g.k_sq.copy()
    ksq[0, 0, 0] = 1.0  # k=0 mode: projector is the identity there
    kdotv = sum(k[a] * v.components[a].coeffs for a in range(3))
    kdotv_over_ksq = kdotv / ksq
    kdotv_over_ksq[0, 0, 0] = 0.0
    comps = []
    for a in range(3):
        c = v.components[a].coeffs - k[a] * kdotv_over_ksq
        comps.append(SpectralScalarField(g, c, v.components[a].real_valued))
    return SpectralVectorField(tuple(comps), divergence_free=True)


def apply_symbol(f: SpectralScalarField, symbol) -> SpectralScalarField:
    """Multiply coefficients by symbol(k1, k2, k3); the k=0 value is set to 0
    when the symbol evaluates to nan there (homogeneous of order 0)."""
    g = f.grid
    with np.errstate(divide="ignore", invalid="ignore"):
        m = symbol(*g.kvec) * np.ones((g.n,) * 3)
    m[~np.isfinite(m)] = 0.0
    return SpectralScalarField(g, f.coeffs * m, False)


def _check_divergence_free(u: SpectralVectorField, tol: float = 1e-6):
    sup = coeff_sup(u)
    if sup == 0:
        return
    if max_divergence(u) > tol * sup:
        raise OperatorError(
            f"input is not divergence-free: residual {max_divergence(u):.3e} "
            f"exceeds {tol:.1e} * sup-coefficient")


def ns_nonlinearity(u: SpectralVectorField, check: bool = True) -> SpectralVectorField:
    """P(u . grad u) for divergence-free u, via the dealiased divergence form."""
    if check:
        _check_divergence_free(u)
    g = u.grid
    real = u.components[0].real_valued
    phys = [to_physical(c) for c in u.components]
    prod_hat = {}  # symmetric: only l <= m transformed
    for l in range(3):
        for m in range(l, 3):
            prod_hat[(l, m)] = from_physical(g, phys[l] * phys[m], real_valued=real).coeffs
    comps = []
    for m in range(3):
        acc = np.zeros((g.n,) * 3, dtype=complex)
        for l in range(3):
            acc += 1j * g.kvec[l] * prod_hat[(min(l, m), max(l, m))]
        comps.append(dealias(SpectralScalarField(g, acc, real)))
    return leray_project(SpectralVectorField(tuple(comps)))


def convective_nonlinearity(u: SpectralVectorField) -> SpectralVectorField:
    """Oracle: P(sum_l u^l d_l u) via physical products of u with its gradients."""
    g = u.grid
    phys = [to_physical(c) for c in u.components]
    comps = []
    for m in range(3):
        acc = None
        for l in range(3):
            dl_um = to_physical(derivative(u.components[m], l + 1))
            term = phys[l] * dl_um
            acc = term if acc is None else acc + term
        f = dealias(from_physical(g, acc, real_valued=u.components[0].real_valued))
        comps.append(f)
    return leray_project(SpectralVectorField(tuple(comps)))


def pair_product_divergence(v: SpectralVectorField, w: SpectralVectorField,
                            symmetrize: bool = False,
                            project: bool = True) -> SpectralVectorField:
    """Dealiased divergence-form product sum_l d_l (v^l w) for divergence-free v
    (equals v . grad w); with symmetrize, sum_l d_l (v^l w + w^l v)."""
    g = v.grid
    real = v.components[0].real_valued and w.components[0].real_valued
    pv = [to_physical(c) for c in v.components]
    pw = [to_physical(c) for c in w.components]
    prod_hat = {}
    for l in range(3):
        for m in range(l, 3) if symmetrize else range(3):
            if symmetrize:
                samples = pv[l] * pw[m] + pw[l] * pv[m]
            else:
                samples = pv[l] * pw[m]
            prod_hat[(l, m)] = from_physical(g, samples, real_valued=real).coeffs
    comps = []
    for m in range(3):
        acc = np.zeros((g.n,) * 3, dtype=complex)
        for l in range(3):
            key = (min(l, m), max(l, m)) if symmetrize else (l, m)
            acc += 1j * g.kvec[l] * prod_hat[key]
        comps.append(dealias(SpectralScalarField(g, acc, real)))
    out = SpectralVectorField(tuple(comps))
    return leray_project(out) if project else out


def heat_bilinear_term(a: SpectralVectorField, b: SpectralVectorField, t: float,
                       project: bool = True) -> SpectralVectorField:
    """P( S(t)a . grad S(t)b ) in divergence form."""
    return pair_product_divergence(heat_flow(a, t), heat_flow(b, t), project=project)


def first_iterate(u0: SpectralVectorField, t: float, check: bool = True) -> SpectralVectorField:
    """P( S(t)u0 . grad S(t)u0 ), the leading Picard correction."""
    return ns_nonlinearity(heat_flow(u0, t), check=check)


def derivative_vector_stream(psi: SpectralScalarField) -> SpectralVectorField:
    """(d2 psi, -d1 psi, 0): a divergence-free two-component field."""
    from .grid import zero_field

    return SpectralVectorField(
        (derivative(psi, 2), derivative(psi, 1) * (-1.0), zero_field(psi.grid)),
        divergence_free=True)


def curl(u: SpectralVectorField) -> SpectralVectorField:
    g = u.grid
    k = g.kvec
    c = [comp.coeffs for comp in u.components]
    real = u.components[0].real_valued
    w1 = 1j * (k[1] * c[2] - k[2] * c[1])
    w2 = 1j * (k[2] * c[0] - k[0] * c[2])
    w3 = 1j * (k[0] * c[1] - k[1] * c[0])
    return SpectralVectorField(tuple(
        SpectralScalarField(g, w, real) for w in (w1, w2, w3)),
        divergence_free=True)
