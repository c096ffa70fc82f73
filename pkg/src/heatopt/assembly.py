"""Space-time load vectors and L2(Q) errors by tensor Gauss-Legendre quadrature.

Quadrature is organised per axis: every axis gets a composite 1D rule and a
sparse matrix evaluating the hat functions at its points. Space-time
integrals are then sequences of sparse contractions over one axis at a time,
processed in slabs of time points to bound memory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .spatial import SpatialGrid
from .temporal import TemporalMesh

# entries per slab of quadrature values
_SLAB_ENTRIES = 1 << 22


@dataclass(eq=False)
class SpaceTimeField:
    """Coefficients of a function in the tensor space, time-major.

    Block ``i`` (``coeffs[i*M_x:(i+1)*M_x]``) holds the spatial coefficients
    at temporal node ``t_{i+1}``.
    """

    grid: SpatialGrid
    mesh: TemporalMesh
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        expected = self.mesh.N_t * self.grid.M_x
        if c.size != expected:
            raise ValueError(f"expected {expected} coefficients, got {c.size}")
        self.coeffs = c

    @classmethod
    def zeros(cls, grid, mesh):
        return cls(grid, mesh, np.zeros(mesh.N_t * grid.M_x))

    @property
    def blocks(self):
        """``(N_t, M_x)`` view of the coefficients."""
        return self.coeffs.reshape(self.mesh.N_t, self.grid.M_x)

    def block(self, i):
        return self.blocks[i].copy()

    def set_block(self, i, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.grid.M_x,):
            raise ValueError(f"block must have shape ({self.grid.M_x},), got {values.shape}")
        self.blocks[i] = values

    def compatible(self, other):
        return self.grid == other.grid and self.mesh == other.mesh


@dataclass(frozen=True)
class QuadratureRule:
    points_per_axis_space: int = 3
    points_per_axis_time: int = 3
    # pieces per sub-interval of an element cut by a target discontinuity
    subdivisions: int = 4
    # time elements touching t=0 or t=T when the target is singular there
    endpoint_points_time: int = 8

    def __post_init__(self):
        for name in ("points_per_axis_space", "points_per_axis_time", "subdivisions", "endpoint_points_time"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def refined(self, extra=2):
        return replace(
            self,
            points_per_axis_space=self.points_per_axis_space + extra,
            points_per_axis_time=self.points_per_axis_time + extra,
            endpoint_points_time=self.endpoint_points_time + extra,
        )


@lru_cache(maxsize=None)
def _gauss(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True, eq=False)
class QuadLine:
    points: np.ndarray
    weights: np.ndarray
    # (n_points, n_dof): hat functions evaluated at the points
    basis: sp.csr_matrix

    @property
    def weighted_basis_t(self):
        return sp.csr_matrix(self.basis.multiply(self.weights[:, None]).T)


def quad_line(n_el, length, npts, *, breakpoints=(), subdivisions=1,
              endpoint_points=None, free_right=False):
    """Composite Gauss rule on a uniform mesh of ``(0, length)``.

    Elements with a breakpoint strictly inside are split there, and each
    piece is divided into ``subdivisions`` equal parts. Node 0 is never a
    degree of freedom; node ``n_el`` is one only when ``free_right``.
    """
    h = length / n_el
    eps = 1e-12 * h
    pts, wts, elem = [], [], []
    for e in range(n_el):
        a, b = e * h, (e + 1) * h
        cuts = sorted(bp for bp in breakpoints if a + eps < bp < b - eps)
        edges = [a, *cuts, b]
        nsub = subdivisions if cuts else 1
        n = npts
        if endpoint_points is not None and e in (0, n_el - 1):
            n = endpoint_points
        xi, om = _gauss(n)
        for lo, hi in zip(edges[:-1], edges[1:]):
            sub = np.linspace(lo, hi, nsub + 1)
            mid = 0.5 * (sub[:-1] + sub[1:])[:, None]
            half = 0.5 * (sub[1:] - sub[:-1])[:, None]
            pts.append((mid + half * xi).ravel())
            wts.append((half * om).ravel())
            elem.append(np.full(nsub * n, e))
    p = np.concatenate(pts)
    w = np.concatenate(wts)
    e = np.concatenate(elem)
    loc = np.clip((p - e * h) / h, 0.0, 1.0)

    n_dof = n_el if free_right else n_el - 1
    rows = np.concatenate([np.arange(p.size), np.arange(p.size)])
    nodes = np.concatenate([e, e + 1])
    vals = np.concatenate([1.0 - loc, loc])
    keep = (nodes >= 1) & (nodes <= n_dof)
    basis = sp.csr_matrix((vals[keep], (rows[keep], nodes[keep] - 1)), shape=(p.size, n_dof))
    return QuadLine(p, w, basis)


def _along_axis(mat, arr, axis):
    """``mat @ arr`` over one axis of ``arr``."""
    moved = np.moveaxis(arr, axis, 0)
    out = mat @ moved.reshape(moved.shape[0], -1)
    out = np.asarray(out).reshape((mat.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, axis)


class SpaceTimeQuadrature:
    """Tensor quadrature over ``Omega x (0, T)`` for one grid, mesh and target."""

    def __init__(self, grid: SpatialGrid, mesh: TemporalMesh, rule: QuadratureRule, target=None):
        self.grid = grid
        self.mesh = mesh
        space_bp = tuple(getattr(target, "space_breakpoints", ()))
        time_bp = tuple(getattr(target, "time_breakpoints", ()))
        singular = bool(getattr(target, "time_endpoint_singular", False))
        self.space = quad_line(
            grid.n_x, 1.0, rule.points_per_axis_space,
            breakpoints=space_bp, subdivisions=rule.subdivisions,
        )
        self.time = quad_line(
            mesh.n_t, mesh.T, rule.points_per_axis_time,
            breakpoints=time_bp, subdivisions=rule.subdivisions,
            endpoint_points=rule.endpoint_points_time if singular else None,
            free_right=True,
        )
        d = grid.dim
        q = self.space.points.size
        self.coords = [
            self.space.points.reshape((1,) * (d - a) + (q,) + (1,) * a) for a in range(d)
        ]
        self.slab = max(1, _SLAB_ENTRIES // q**d)

    @property
    def space_shape(self):
        return (self.space.points.size,) * self.grid.dim

    def slabs(self):
        n = self.time.points.size
        for start in range(0, n, self.slab):
            yield slice(start, min(n, start + self.slab))

    def times(self, sl):
        return self.time.points[sl].reshape((-1,) + (1,) * self.grid.dim)

    def interpolate(self, blocks, sl):
        """Values of the discrete function at the slab's quadrature points."""
        vals = self.time.basis[sl] @ blocks
        vals = vals.reshape((vals.shape[0],) + self.grid.shape)
        for ax in range(1, self.grid.dim + 1):
            vals = _along_axis(self.space.basis, vals, ax)
        return vals

    def load(self, values):
        """Load vector ``int_Q g psi_k phi_j`` for ``g = values(sl, t, x)``."""
        wx = self.space.weighted_basis_t
        tw = self.time.basis.multiply(self.time.weights[:, None]).tocsr()
        out = np.zeros((self.mesh.N_t, self.grid.M_x))
        for sl in self.slabs():
            t = self.times(sl)
            g = np.broadcast_to(values(sl, t, self.coords), t.shape[:1] + self.space_shape)
            for ax in range(1, self.grid.dim + 1):
                g = _along_axis(wx, g, ax)
            out += tw[sl].T @ g.reshape(g.shape[0], -1)
        return out

    def reduce(self, g, sl):
        """Quadrature sum of slab values ``g``."""
        g = np.broadcast_to(g, (sl.stop - sl.start,) + self.space_shape)
        for _ in range(self.grid.dim):
            g = g @ self.space.weights
        return float(g @ self.time.weights[sl])

    def integrate(self, values):
        """``int_Q g`` for ``g = values(sl, t, x)``."""
        return sum(self.reduce(values(sl, self.times(sl), self.coords), sl) for sl in self.slabs())


def _check_dim(grid, target):
    if target.dim != grid.dim:
        raise ValueError(f"target is {target.dim}-dimensional but the grid is {grid.dim}-dimensional")


def assemble_rhs(grid: SpatialGrid, mesh: TemporalMesh, target, quad: QuadratureRule | None = None):
    """Load vector ``f[j, k] = int_Q target * psi_k * phi_j``."""
    _check_dim(grid, target)
    q = SpaceTimeQuadrature(grid, mesh, quad or QuadratureRule(), target)
    f = q.load(lambda sl, t, x: target.evaluate(x, t))
    return SpaceTimeField(grid, mesh, f)


def l2q_error(u: SpaceTimeField | None, target, quad: QuadratureRule | None = None,
              grid: SpatialGrid | None = None, mesh: TemporalMesh | None = None):
    """``||u_h - target||_{L2(Q)}`` with the assembly rule refined by two points per axis.

    ``u=None`` measures the target itself; ``grid`` and ``mesh`` are then required.
    """
    if u is not None:
        grid, mesh = u.grid, u.mesh
    if grid is None or mesh is None:
        raise ValueError("grid and mesh are required when u is None")
    _check_dim(grid, target)
    q = SpaceTimeQuadrature(grid, mesh, (quad or QuadratureRule()).refined(), target)

    if u is None:
        def sq(sl, t, x):
            return np.square(target.evaluate(x, t))
    else:
        blocks = u.blocks

        def sq(sl, t, x):
            return np.square(q.interpolate(blocks, sl) - target.evaluate(x, t))

    return float(np.sqrt(max(q.integrate(sq), 0.0)))


def l2q_error_and_norm(u: SpaceTimeField, target, quad: QuadratureRule | None = None):
    """``(||u_h - target||, ||target||)`` in L2(Q) from a single quadrature pass."""
    _check_dim(u.grid, target)
    q = SpaceTimeQuadrature(u.grid, u.mesh, (quad or QuadratureRule()).refined(), target)
    blocks = u.blocks
    err2 = norm2 = 0.0
    for sl in q.slabs():
        ref = target.evaluate(q.coords, q.times(sl))
        err2 += q.reduce(np.square(q.interpolate(blocks, sl) - ref), sl)
        norm2 += q.reduce(np.square(ref), sl)
    return float(np.sqrt(err2)), float(np.sqrt(norm2))
