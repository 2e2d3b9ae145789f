"""Direct dealiased pseudo-spectral time integration of the incompressible
Navier-Stokes system (unit viscosity) on the periodic box.

Time stepping is integrating-factor RK4: the viscous factor e^{-|k|^2 dt} is
exact, the dealiased nonlinearity -P div(u (x) u) enters through classical RK4
stage weights.  Dissipation and H^{3/2} integrals accumulate with the same
stage weights, which keeps the energy identity residual at the scheme's own
fourth-order error.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import GridSpec, SpectralVectorField, l2_norm_spectral, physical_magnitude
from .norms import sobolev_norm
from .operators import curl, max_divergence, ns_nonlinearity
from .series import StoredSeries
from .timegrid import TimeGrid


class SolverError(ValueError):
    pass


class CFLError(SolverError):
    def __init__(self, dt, dt_max):
        super().__init__(f"dt={dt:g} violates the CFL bound {dt_max:g}; "
                         f"suggested dt <= {dt_max:g}")
        self.suggested_dt = dt_max


@dataclass
class DtPolicy:
    cfl: float = 0.5
    dt_max: float = 2.5e-2
    dt_floor: float = 1e-6
    recheck_every: int = 10

    def dt_bound(self, grid: GridSpec, u_max: float) -> float:
        if u_max <= 0:
            return self.dt_max
        return min(self.dt_max, self.cfl * grid.spacing / u_max)


def _as_stack(u: SpectralVectorField) -> np.ndarray:
    return np.stack([c.coeffs for c in u.components])


def _as_field(grid, stack, real=True) -> SpectralVectorField:
    from .grid import SpectralScalarField

    return SpectralVectorField(
        tuple(SpectralScalarField(grid, stack[a], real) for a in range(3)),
        divergence_free=True)


def _rhs(grid, stack, real) -> np.ndarray:
    return _as_stack(ns_nonlinearity(_as_field(grid, stack, real), check=False)) * (-1.0)


def _gradient_sq(grid, stack) -> float:
    return float(grid.box_length ** 3 *
                 np.sum(grid.k_sq * (stack.real ** 2 + stack.imag ** 2)))


def _h32_sq(grid, stack) -> float:
    return float(grid.box_length ** 3 *
                 np.sum(grid.k_mag ** 3 * (stack.real ** 2 + stack.imag ** 2)))


def step(u: SpectralVectorField, dt: float, check_cfl: bool = True,
         cfl: float = 0.5) -> SpectralVectorField:
    """One integrating-factor RK4 step."""
    if check_cfl:
        umax = float(np.max(physical_magnitude(u)))
        bound = cfl * u.grid.spacing / umax if umax > 0 else np.inf
        if dt > bound:
            raise CFLError(dt, bound)
    new, _ = _step_raw(u.grid, _as_stack(u), dt,
                       u.components[0].real_valued)
    return _as_field(u.grid, new, u.components[0].real_valued)


def _step_raw(grid, stack, dt, real, quadrature=None):
    """Advance the coefficient stack; optionally accumulate stage-weighted
    integrals of the callables in `quadrature` (called on stage stacks)."""
    E = np.exp(-0.5 * dt * grid.k_sq)
    E2 = E * E
    y1 = stack
    k1 = _rhs(grid, y1, real)
    y2 = E * (stack + 0.5 * dt * k1)
    k2 = _rhs(grid, y2, real)
    y3 = E * stack + 0.5 * dt * k2
    k3 = _rhs(grid, y3, real)
    y4 = E2 * stack + dt * E * k3
    k4 = _rhs(grid, y4, real)
    new = E2 * stack + (dt / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
    increments = None
    if quadrature:
        increments = [
            (dt / 6.0) * (g(y1) + 2.0 * g(y2) + 2.0 * g(y3) + g(y4))
            for g in quadrature
        ]
    return new, increments


@dataclass
class SolveTrace:
    times: np.ndarray
    energy: np.ndarray
    hhalf: np.ndarray
    dissipation: np.ndarray        # cumulative int_0^t ||grad u||_2^2
    h32_sq_integral: np.ndarray    # cumulative int_0^t ||u||_{H^{3/2}}^2
    dts: np.ndarray
    max_vorticity: np.ndarray      # sampled; nan where unsampled
    blowup_flag: bool
    flag_reason: str
    early_exit: bool
    thresholds: dict
    snapshots: StoredSeries = None
    snapshot_times: np.ndarray = None

    def energy_identity_residual(self) -> np.ndarray:
        return np.abs(self.energy + 2.0 * self.dissipation - self.energy[0])

    def rows(self):
        flag = 1 if self.blowup_flag else 0
        for i in range(len(self.times)):
            yield (self.times[i], self.energy[i], self.hhalf[i],
                   self.dissipation[i], self.h32_sq_integral[i], self.dts[i], flag)

    def summary(self):
        return {
            "t_final": float(self.times[-1]),
            "energy_final": float(self.energy[-1]),
            "hhalf_initial": float(self.hhalf[0]),
            "hhalf_final": float(self.hhalf[-1]),
            "hhalf_max": float(np.max(self.hhalf)),
            "dissipation_final": float(self.dissipation[-1]),
            "h32_sq_integral_final": float(self.h32_sq_integral[-1]),
            "max_energy_identity_residual": float(np.max(self.energy_identity_residual())),
            "blowup_flag": self.blowup_flag,
            "flag_reason": self.flag_reason,
            "early_exit": self.early_exit,
            "thresholds": self.thresholds,
            "steps": int(len(self.times) - 1),
        }


def solve(u0: SpectralVectorField, t_end: float = 5.0, dt_policy: DtPolicy = None,
          snapshot_times=None, hhalf_growth_cap: float = 50.0,
          early_exit_fraction: float = 0.01, vorticity_every: int = 10) -> SolveTrace:
    """Integrate to t_end, monitoring the critical norms.

    The blow-up indicator (flag, not exception) trips when ||u||_{H^1/2}
    exceeds hhalf_growth_cap times its initial value or the CFL timestep
    falls below the policy floor.  Early exit once ||u||_{H^1/2} decays below
    early_exit_fraction of its initial value (pure heat regime).
    """
    policy = dt_policy or DtPolicy()
    grid = u0.grid
    real = u0.components[0].real_valued
    stack = _as_stack(u0).copy()
    quad = (lambda y: _gradient_sq(grid, y), lambda y: _h32_sq(grid, y))

    snapshot_times = np.sort(np.asarray(snapshot_times)) if snapshot_times is not None else None
    snap_fields = []
    snap_actual = []
    next_snap = 0

    t = 0.0
    umax = float(np.max(physical_magnitude(u0)))
    dt = policy.dt_bound(grid, umax)
    times, energies, hhalfs, diss, h32s, dts, vorts = [], [], [], [], [], [], []

    def record(vort):
        times.append(t)
        energies.append(l2_norm_spectral(_as_field(grid, stack, real)) ** 2)
        hh = float(np.sqrt(grid.box_length ** 3 *
                           np.sum(grid.k_mag * (stack.real ** 2 + stack.imag ** 2))))
        hhalfs.append(hh)
        diss.append(cum_diss)
        h32s.append(cum_h32)
        dts.append(dt)
        vorts.append(vort)
        return hh

    def vorticity_max():
        w = curl(_as_field(grid, stack, real))
        return float(np.max(physical_magnitude(w)))

    cum_diss = 0.0
    cum_h32 = 0.0
    hh0 = record(vorticity_max())
    blowup = False
    reason = ""
    early = False
    step_count = 0

    while t < t_end - 1e-12:
        if step_count % policy.recheck_every == 0:
            umax = float(np.max(physical_magnitude(_as_field(grid, stack, real))))
            bound = policy.dt_bound(grid, umax)
            if bound < policy.dt_floor:
                blowup = True
                reason = f"CFL timestep {bound:g} fell below floor {policy.dt_floor:g}"
                break
            dt = bound
        dt_step = min(dt, t_end - t)
        stack, incs = _step_raw(grid, stack, dt_step, real, quadrature=quad)
        cum_diss += incs[0]
        cum_h32 += incs[1]
        t += dt_step
        step_count += 1
        if snapshot_times is not None and next_snap < len(snapshot_times):
            while next_snap < len(snapshot_times) and t >= snapshot_times[next_snap] - 1e-12:
                snap_fields.append(stack.astype(np.complex64))
                snap_actual.append(t)
                next_snap += 1
        sample_vort = (step_count % vorticity_every == 0)
        hh = record(vorticity_max() if sample_vort else float("nan"))
        if hh > hhalf_growth_cap * max(hh0, 1e-300):
            blowup = True
            reason = (f"||u||_H1/2 grew past {hhalf_growth_cap:g} x initial "
                      f"({hh:g} vs {hh0:g})")
            break
        if hh < early_exit_fraction * hh0:
            early = True
            break

    snapshots = None
    snap_t = None
    if snap_actual:
        snap_t = np.array(snap_actual)
        if len(snap_t) >= 3 and np.all(np.diff(snap_t) > 0) and snap_t[0] > 0:
            tg = TimeGrid(snap_t, rho=float("nan"))
            data = np.stack(snap_fields)
            snapshots = StoredSeries(tg, grid, data, real_valued=real,
                                     divergence_free=True)

    return SolveTrace(
        np.array(times), np.array(energies), np.array(hhalfs), np.array(diss),
        np.array(h32s), np.array(dts), np.array(vorts),
        blowup, reason, early,
        {"hhalf_growth_cap": hhalf_growth_cap, "dt_floor": policy.dt_floor,
         "early_exit_fraction": early_exit_fraction, "cfl": policy.cfl},
        snapshots, snap_t)


def duhamel_residual(snapshots: StoredSeries, u0: SpectralVectorField) -> float:
    """Sup over snapshot nodes of the relative mild-form residual
    ||u(t) - S(t)u0 + int_0^t S(t-t') P(u . grad u) dt'||_2 / ||u(t)||_2."""
    from .operators import heat_flow
    from .series import MappedSeries
    from .wellposed import heat_convolve

    if snapshots is None:
        raise SolverError("no snapshots stored; pass snapshot_times to solve()")
    src = MappedSeries(snapshots, lambda u, t: ns_nonlinearity(u, check=False))
    integral = heat_convolve(src)
    worst = 0.0
    for i in range(len(snapshots)):
        t = float(snapshots.tgrid.times[i])
        u_t = snapshots.field(i)
        mild = heat_flow(u0, t) - integral.field(i)
        num = l2_norm_spectral(u_t - mild)
        den = l2_norm_spectral(u_t)
        if den > 0:
            worst = max(worst, num / den)
    return worst
