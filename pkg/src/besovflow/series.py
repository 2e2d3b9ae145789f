"""Time-sampled spectral fields on a TimeGrid.

A series is either lazy (a callable t -> field, evaluated on demand) or stored
(stacked coefficient cubes, complex64 by default to bound memory; single-time
algebra stays complex128).
"""

import numpy as np

from .grid import GridSpec, SpectralScalarField, SpectralVectorField
from .operators import heat_flow
from .timegrid import TimeGrid


class SeriesError(ValueError):
    pass


class TimeSampled:
    """Base: fields indexed by the nodes of a TimeGrid."""

    def __init__(self, tgrid: TimeGrid, grid: GridSpec, is_vector: bool):
        self.tgrid = tgrid
        self.grid = grid
        self.is_vector = is_vector

    def field(self, i: int):
        raise NotImplementedError

    def __len__(self):
        return len(self.tgrid)


class LazySeries(TimeSampled):
    def __init__(self, tgrid, grid, func, is_vector=True):
        super().__init__(tgrid, grid, is_vector)
        self._func = func

    def field(self, i):
        return self._func(float(self.tgrid.times[i]))


class HeatFlowSeries(TimeSampled):
    """t -> S(t) u0."""

    def __init__(self, u0, tgrid):
        super().__init__(tgrid, u0.grid, isinstance(u0, SpectralVectorField))
        self.u0 = u0

    def field(self, i):
        return heat_flow(self.u0, float(self.tgrid.times[i]))


class StoredSeries(TimeSampled):
    """Stacked coefficient cubes, shape (n_t, 3, n, n, n) or (n_t, n, n, n)."""

    def __init__(self, tgrid, grid, data, real_valued=True, divergence_free=False,
                 dtype=np.complex64):
        is_vector = data.ndim == 5
        super().__init__(tgrid, grid, is_vector)
        self.data = data.astype(dtype, copy=False)
        self.real_valued = real_valued
        self.divergence_free = divergence_free

    @classmethod
    def empty(cls, tgrid, grid, is_vector=True, dtype=np.complex64, **kw):
        shape = (len(tgrid), 3) + (grid.n,) * 3 if is_vector else (len(tgrid),) + (grid.n,) * 3
        return cls(tgrid, grid, np.zeros(shape, dtype=dtype), **kw)

    @classmethod
    def from_series(cls, src: TimeSampled, dtype=np.complex64):
        out = None
        for i in range(len(src)):
            f = src.field(i)
            if out is None:
                out = cls.empty(src.tgrid, src.grid,
                                isinstance(f, SpectralVectorField), dtype=dtype)
                if isinstance(f, SpectralVectorField):
                    out.real_valued = f.components[0].real_valued
                    out.divergence_free = f.divergence_free
                else:
                    out.real_valued = f.real_valued
            out.set_field(i, f)
        return out

    def set_field(self, i, f):
        if isinstance(f, SpectralVectorField):
            for a in range(3):
                self.data[i, a] = f.components[a].coeffs
        else:
            self.data[i] = f.coeffs

    def field(self, i):
        if self.is_vector:
            comps = tuple(
                SpectralScalarField(self.grid, self.data[i, a].astype(np.complex128),
                                    self.real_valued)
                for a in range(3))
            return SpectralVectorField(comps, self.divergence_free)
        return SpectralScalarField(self.grid, self.data[i].astype(np.complex128),
                                   self.real_valued)

    def copy(self):
        return StoredSeries(self.tgrid, self.grid, self.data.copy(),
                            self.real_valued, self.divergence_free, self.data.dtype)


class MappedSeries(TimeSampled):
    """Apply fn to another series' fields on access."""

    def __init__(self, src: TimeSampled, fn, is_vector=None):
        super().__init__(src.tgrid, src.grid,
                         src.is_vector if is_vector is None else is_vector)
        self.src = src
        self.fn = fn

    def field(self, i):
        return self.fn(self.src.field(i), float(self.tgrid.times[i]))


class DifferenceSeries(TimeSampled):
    def __init__(self, a: TimeSampled, b: TimeSampled):
        if a.tgrid is not b.tgrid and not np.array_equal(a.tgrid.times, b.tgrid.times):
            raise SeriesError("series on different time grids")
        super().__init__(a.tgrid, a.grid, a.is_vector)
        self.a, self.b = a, b

    def field(self, i):
        return self.a.field(i) - self.b.field(i)


class SumSeries(TimeSampled):
    def __init__(self, parts):
        t0 = parts[0]
        for p in parts[1:]:
            if not np.array_equal(p.tgrid.times, t0.tgrid.times):
                raise SeriesError("series on different time grids")
        super().__init__(t0.tgrid, t0.grid, t0.is_vector)
        self.parts = parts

    def field(self, i):
        acc = self.parts[0].field(i)
        for p in self.parts[1:]:
            acc = acc + p.field(i)
        return acc
