"""Geometric time grids with quadrature weights for the measures dt, t dt, dt/t.

Integrals over (0, infinity) are truncated to [0, t_max]: trapezoid on the
geometric nodes t_i = t_min * rho^i plus an analytic rectangle for the
[0, t_min] head (the integrands of interest are bounded there).  The tail
beyond t_max is dropped; with the default t_max >= L^2 every resolved heat
rate has decayed below 1e-8 of its integral.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class TimeGridError(ValueError):
    pass


@dataclass
class TimeGrid:
    times: np.ndarray
    rho: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 3 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise TimeGridError("times must be a positive increasing 1-d array")
        self.times = t

    def __len__(self):
        return len(self.times)

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @cached_property
    def weights_trapezoid(self) -> np.ndarray:
        """Plain trapezoid weights on the nodes (no head chunk)."""
        t = self.times
        w = np.zeros_like(t)
        dt = np.diff(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
        return w

    @cached_property
    def weights_l1(self) -> np.ndarray:
        """Weights for int_0^{t_max} y(t) dt; the [0, t_min] head uses y(t_min)."""
        w = self.weights_trapezoid.copy()
        w[0] += self.t_min
        return w

    @cached_property
    def weights_l2dt(self) -> np.ndarray:
        """Weights on y = |g|^2 for ||g||_{L^2(dt)}^2."""
        return self.weights_l1

    @cached_property
    def weights_l2tdt(self) -> np.ndarray:
        """Weights on y = |g|^2 for ||g||_{L^2(t dt)}^2; head = t_min^2/2 * y(t_min)."""
        w = self.weights_trapezoid * self.times
        w[0] += 0.5 * self.t_min ** 2
        return w

    @cached_property
    def weights_dlogt(self) -> np.ndarray:
        """Weights for int y(t) dt/t over [t_min, t_max] (no head; callers handle it)."""
        t = self.times
        w = np.zeros_like(t)
        dl = np.diff(np.log(t))
        w[:-1] += 0.5 * dl
        w[1:] += 0.5 * dl
        return w

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights_l1, values))

    def integrate_prefix(self, values: np.ndarray, T: float) -> float:
        """int_0^T y dt using the nodes: head chunk + trapezoid + partial segment."""
        t = self.times
        if T <= 0:
            return 0.0
        if T <= t[0]:
            return float(T * values[0])
        total = t[0] * values[0]
        i = int(np.searchsorted(t, T, side="right")) - 1
        if i >= 1:
            total += float(np.trapezoid(values[: i + 1], t[: i + 1]))
        if i < len(t) - 1 and T > t[i]:
            frac = (T - t[i]) / (t[i + 1] - t[i])
            y_T = values[i] + frac * (values[i + 1] - values[i])
            total += 0.5 * (values[i] + y_T) * (T - t[i])
        return float(total)

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        """Prefix integrals int_0^{t_i} y dt at every node."""
        t = self.times
        out = np.empty_like(t)
        out[0] = t[0] * values[0]
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(t)
        out[1:] = out[0] + np.cumsum(seg)
        return out

    @classmethod
    def geometric(cls, t_min: float, t_max: float, rho: float = 1.25) -> "TimeGrid":
        if not 1.0 < rho <= 2.0:
            raise TimeGridError(f"rho must lie in (1, 2], got {rho}")
        if not 0 < t_min < t_max:
            raise TimeGridError("need 0 < t_min < t_max")
        count = int(np.ceil(np.log(t_max / t_min) / np.log(rho))) + 1
        times = t_min * rho ** np.arange(count)
        times[-1] = min(times[-1], t_max * rho)  # keep last node >= t_max
        return cls(times, rho)

    @classmethod
    def for_grid(cls, grid, rho: float = 1.25, t_min_factor: float = 0.02,
                 t_max: float = None) -> "TimeGrid":
        """Default policy: t_min = factor * 4^{-j_max} resolves the fastest band,
        t_max >= L^2 (spec floor) outlasts the slowest resolved heat rate."""
        from .dyadic import build_family

        fam = build_family(grid)
        t_min = t_min_factor * 4.0 ** (-fam.j_max)
        if t_max is None:
            t_max = max(grid.box_length ** 2, 20.0 * 4.0 ** (-fam.j_min))
        return cls.geometric(t_min, t_max, rho)
