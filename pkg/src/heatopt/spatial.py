"""Tensor-product P1 finite elements on the unit cube with zero Dirichlet data.

Spatial vectors are flat with the lexicographic node order (x1 fastest).
Every operator accepts arrays of shape ``(..., M_x)`` and acts on the last
axis, so a whole space-time block array can be passed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .tridiag import TridiagonalSym

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class SpatialGrid:
    dim: int
    n_x: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if int(self.n_x) != self.n_x or self.n_x < 2:
            raise ValueError(f"n_x must be an integer >= 2, got {self.n_x!r}")
        object.__setattr__(self, "n_x", int(self.n_x))

    @property
    def h_x(self):
        return 1.0 / self.n_x

    @property
    def m_per_axis(self):
        return self.n_x - 1

    @property
    def M_x(self):
        return self.m_per_axis**self.dim

    @property
    def shape(self):
        """Tensor shape of a spatial vector; array axis ``-1 - a`` is coordinate ``x_{a+1}``."""
        return (self.m_per_axis,) * self.dim

    def nodes_1d(self):
        return self.h_x * np.arange(1, self.n_x)

    def node_coordinates(self):
        """``(M_x, dim)`` array of interior node coordinates in DoF order."""
        axes = np.meshgrid(*[self.nodes_1d()] * self.dim, indexing="ij")
        # meshgrid axis a varies along array axis a; DoF order wants x1 last
        return np.stack([ax.ravel() for ax in reversed(axes)], axis=-1)


class _ScratchPool:
    """Reusable scratch arrays keyed by shape, so repeated applies do not allocate."""

    def __init__(self):
        self._free = {}

    def take(self, shape):
        stack = self._free.get(shape)
        return stack.pop() if stack else np.empty(shape)

    def give(self, *arrays):
        for a in arrays:
            self._free.setdefault(a.shape, []).append(a)


class SpatialOperator:
    """Matrix-free mass and stiffness matrices of a :class:`SpatialGrid`.

    Applies reuse scratch buffers held by the instance, so one operator
    should not be shared between threads.
    """

    def __init__(self, grid: SpatialGrid):
        self.grid = grid
        m, h = grid.m_per_axis, grid.h_x
        self.mass1d = TridiagonalSym.constant(m, 2.0 * h / 3.0, h / 6.0)
        self.stiff1d = TridiagonalSym.constant(m, 2.0 / h, -1.0 / h)
        self._mass_stencil = np.array([h / 6.0, 2.0 * h / 3.0, h / 6.0])
        self._stiff_stencil = np.array([-1.0 / h, 2.0 / h, -1.0 / h])
        self._pool = _ScratchPool()

    @staticmethod
    def _sweep(t, stencil, axis, out):
        # constant-coefficient tridiagonal product; zero padding is the Dirichlet condition
        correlate1d(t, stencil, axis=axis, output=out, mode="constant", cval=0.0)

    def _tensor(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.grid.M_x:
            raise ValueError(
                f"last axis has length {v.shape[-1]}, expected M_x={self.grid.M_x}"
            )
        return np.ascontiguousarray(v).reshape(v.shape[:-1] + self.grid.shape)

    def _flat(self, t):
        return t.reshape(t.shape[: t.ndim - self.grid.dim] + (self.grid.M_x,))

    def _mass_into(self, src, axes, out):
        if len(axes) == 1:
            self._sweep(src, self._mass_stencil, axes[0], out)
            return
        tmp = self._pool.take(src.shape)
        self._sweep(src, self._mass_stencil, axes[0], tmp)
        self._mass_into(tmp, axes[1:], out)
        self._pool.give(tmp)

    def _mass_and_stiffness_into(self, t, axes, out_m, out_k):
        # A v = sum over axes of K on that axis and M on the others; M v shares the leading sweeps
        ax, rest = axes[0], axes[1:]
        if not rest:
            self._sweep(t, self._mass_stencil, ax, out_m)
            self._sweep(t, self._stiff_stencil, ax, out_k)
            return
        pool = self._pool
        wm, wk = pool.take(t.shape), pool.take(t.shape)
        self._sweep(t, self._mass_stencil, ax, wm)
        self._sweep(t, self._stiff_stencil, ax, wk)
        self._mass_and_stiffness_into(wm, rest, out_m, out_k)
        self._mass_into(wk, rest, wm)
        out_k += wm
        pool.give(wm, wk)

    def _axes(self, t):
        return tuple(range(t.ndim - self.grid.dim, t.ndim))

    def mass_apply(self, v):
        t = self._tensor(v)
        out = np.empty_like(t)
        self._mass_into(t, self._axes(t), out)
        return self._flat(out)

    def stiffness_apply(self, v):
        return self.mass_and_stiffness_apply(v)[1]

    def mass_and_stiffness_apply(self, v):
        t = self._tensor(v)
        mv, av = np.empty_like(t), np.empty_like(t)
        self._mass_and_stiffness_into(t, self._axes(t), mv, av)
        return self._flat(mv), self._flat(av)

    def shifted_apply(self, rho, lambda_i, v, out=None):
        """Apply ``(1 + rho*lambda_i) M + rho A``.

        ``lambda_i`` may be an array broadcasting against the leading axes of
        ``v`` (one shift per row of a batch). ``out`` receives the result when
        given.
        """
        t = self._tensor(v)
        mv = np.empty_like(t) if out is None else out.reshape(t.shape)
        av = self._pool.take(t.shape)
        self._mass_and_stiffness_into(t, self._axes(t), mv, av)
        shift = 1.0 + rho * np.asarray(lambda_i, dtype=float)
        if shift.ndim:
            shift = shift.reshape(shift.shape + (1,) * self.grid.dim)
        mv *= shift
        av *= rho
        mv += av
        self._pool.give(av)
        return self._flat(mv)

    def mass_solve(self, v):
        """Exact inverse of the mass matrix, one tridiagonal solve per axis."""
        t = self._tensor(v)
        for ax in self._axes(t):
            t = self.mass1d.solve(t, axis=ax)
        return self._flat(t)

    def dense_assemble(self, limit=DENSE_LIMIT):
        """Explicit ``(M, A)`` for small grids, used by test oracles."""
        if self.grid.M_x > limit:
            raise ValueError(f"M_x={self.grid.M_x} exceeds dense assembly limit {limit}")
        m1 = self.mass1d.toarray()
        k1 = self.stiff1d.toarray()
        d = self.grid.dim
        mass = m1
        for _ in range(d - 1):
            mass = np.kron(mass, m1)
        stiff = np.zeros_like(mass)
        for a in range(d):
            term = np.ones((1, 1))
            for b in range(d):
                term = np.kron(term, k1 if a == b else m1)
            stiff += term
        return mass, stiff


def spatial_mass_apply(op: SpatialOperator, v):
    return op.mass_apply(v)


def spatial_stiffness_apply(op: SpatialOperator, v):
    return op.stiffness_apply(v)


def shifted_apply(op: SpatialOperator, rho, lambda_i, v):
    return op.shifted_apply(rho, lambda_i, v)


def dense_assemble(op: SpatialOperator, limit=DENSE_LIMIT):
    return op.dense_assemble(limit)
