"""Space-time solvers for ``K_h u = f`` and control reconstruction.

``K_h = M_t (x) M_x + rho (A_t (x) M_x + M_t (x) A_x)``. With the generalized
eigenpairs of ``(A_t, M_t)`` the temporal coupling is removed by sine
transforms, leaving ``N_t`` independent, well conditioned spatial problems
``((1 + rho lambda_i) M_x + rho A_x) v_i = g_i``, solved here by CG.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assembly import QuadratureRule, SpaceTimeField, SpaceTimeQuadrature
from .spatial import SpatialGrid, SpatialOperator
from .targets import reaction
from .temporal import TemporalEigenSystem, TemporalMesh, dst2, idst2, temporal_mass_matrix

#: relative residual above which a direct solve is rejected
RESIDUAL_LIMIT = 1e-6
#: floor for the iteration cap of the global CG
GLOBAL_CG_MIN_ITER = 1000


class SolverError(RuntimeError):
    def with_context(self, context):
        """Copy of this error, same type and attributes, with ``context`` prefixed."""
        cls = type(self)
        new = cls.__new__(cls)
        new.__dict__.update(self.__dict__)
        new.args = (f"{context}: {self}",)
        return new


class CGConvergenceError(SolverError):
    def __init__(self, channel, iterations, residual):
        self.channel = channel
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"CG did not converge for time index {channel} after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


@dataclass(frozen=True)
class SolverConfig:
    rho: float
    cg_rel_tol: float = 1e-12
    # None means 10 * m_per_axis for the channel solves
    cg_max_iter: int | None = None
    record_iterations: bool = False
    workers: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.rho) or self.rho < 0:
            raise ValueError(f"rho must be a finite non-negative number, got {self.rho!r}")
        if not 0 < self.cg_rel_tol < 1:
            raise ValueError(f"cg_rel_tol must lie in (0, 1), got {self.cg_rel_tol!r}")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be positive")

    def max_iter(self, grid: SpatialGrid):
        return self.cg_max_iter if self.cg_max_iter is not None else 10 * grid.m_per_axis


@dataclass(eq=False)
class SolveReport:
    solution: SpaceTimeField
    cg_iter_mean: float
    cg_iter_var: float
    wall_time: float  # seconds
    residual_norm: float
    iterations: np.ndarray | None = None


def batched_cg(apply, b, rel_tol, max_iter):
    """Unpreconditioned CG on independent SPD systems, one per row of ``b``.

    ``apply(p, rows)`` must return the operators of the original rows ``rows``
    applied to the matching rows of ``p``. Each row stops once
    ``||r|| <= rel_tol * ||b_row||``. Converged rows are dropped from the
    working arrays, so later iterations only touch unfinished rows. Returns
    the solutions and the per-row iteration counts.
    """
    b = np.asarray(b, dtype=float)
    out = np.zeros_like(b)
    iters = np.zeros(b.shape[0], dtype=int)
    bb = np.einsum("ij,ij->i", b, b)
    thresh = rel_tol**2 * bb
    rows = np.flatnonzero(bb > thresh)
    x = np.zeros((rows.size, b.shape[1]))
    r = b[rows]
    p = r.copy()
    rr = bb[rows]
    step = np.empty_like(p)
    it = 0
    while rows.size:
        if it >= max_iter:
            rel = np.sqrt(rr / bb[rows])
            worst = int(np.argmax(rel))
            raise CGConvergenceError(int(rows[worst]), it, float(rel[worst]))
        q = apply(p, rows)
        pq = np.einsum("ij,ij->i", p, q)
        if np.any(pq <= 0):
            raise SolverError("operator is not positive definite (CG breakdown)")
        alpha = (rr / pq)[:, None]
        np.multiply(p, alpha, out=step)
        x += step
        q *= alpha
        r -= q
        rr_new = np.einsum("ij,ij->i", r, r)
        p *= (rr_new / rr)[:, None]
        p += r
        rr = rr_new
        it += 1
        done = rr <= thresh[rows]
        if done.any():
            out[rows[done]] = x[done]
            iters[rows[done]] = it
            keep = ~done
            rows, x, r, p, rr = rows[keep], x[keep], r[keep], p[keep], rr[keep]
            step = step[: rows.size]
    return out, iters


def _field(u, grid, mesh):
    if not isinstance(u, SpaceTimeField):
        return SpaceTimeField(grid, mesh, u)
    if u.grid != grid or u.mesh != mesh:
        raise ValueError("field does not match the grid and mesh")
    return u


def _eig_for(mesh, eig):
    if eig is None:
        return TemporalEigenSystem.build(mesh)
    if not eig.matches(mesh):
        raise ValueError(f"eigensystem built for n_t={eig.n_t}, T={eig.T} does not match the mesh")
    return eig


def apply_Kh(grid: SpatialGrid, mesh: TemporalMesh, rho, u, eig: TemporalEigenSystem | None = None,
             workers=None):
    """Matrix-free ``K_h u`` using ``A_t = M_t C diag(lambda) C^{-1}``."""
    u = _field(u, grid, mesh)
    op = SpatialOperator(grid)
    mt = temporal_mass_matrix(mesh)
    U = u.blocks
    mu, au = op.mass_and_stiffness_apply(U)
    inner = mu + rho * au
    if rho:
        lam = _eig_for(mesh, eig).lambdas
        inner += rho * dst2(lam[:, None] * idst2(mu, axis=0, workers=workers), axis=0, workers=workers)
    return SpaceTimeField(grid, mesh, mt.matvec(inner, axis=0))


def _relative_residual(grid, mesh, rho, u, f, eig, workers):
    r = apply_Kh(grid, mesh, rho, u, eig, workers).coeffs - f.coeffs
    fn = np.linalg.norm(f.coeffs)
    return float(np.linalg.norm(r) / fn) if fn > 0 else float(np.linalg.norm(r))


def solve_direct(grid: SpatialGrid, mesh: TemporalMesh, eig: TemporalEigenSystem | None,
                 cfg: SolverConfig, f) -> SolveReport:
    """Fast direct solve: temporal diagonalization plus one spatial CG per time channel."""
    f = _field(f, grid, mesh)
    eig = _eig_for(mesh, eig)
    op = SpatialOperator(grid)
    mt = temporal_mass_matrix(mesh)
    rho = cfg.rho
    lam = eig.lambdas

    buf = {}

    def apply(p, rows):
        # one output buffer per batch shape; the batch only shrinks
        out = buf.get(p.shape)
        if out is None:
            buf.clear()
            out = buf[p.shape] = np.empty_like(p)
        return op.shifted_apply(rho, lam[rows], p, out=out)

    start = time.perf_counter()
    g = idst2(mt.solve(f.blocks, axis=0), axis=0, workers=cfg.workers)
    v, iters = batched_cg(apply, g, cfg.cg_rel_tol, cfg.max_iter(grid))
    u = SpaceTimeField(grid, mesh, dst2(v, axis=0, workers=cfg.workers))
    elapsed = time.perf_counter() - start

    res = _relative_residual(grid, mesh, rho, u, f, eig, cfg.workers)
    if not res <= RESIDUAL_LIMIT:
        raise SolverError(f"direct solve residual {res:.3e} exceeds {RESIDUAL_LIMIT:.0e}")
    return SolveReport(
        solution=u,
        cg_iter_mean=float(iters.mean()),
        cg_iter_var=float(iters.var()),
        wall_time=elapsed,
        residual_norm=res,
        iterations=iters if cfg.record_iterations else None,
    )


def solve_global_cg(grid: SpatialGrid, mesh: TemporalMesh, eig: TemporalEigenSystem | None,
                    cfg: SolverConfig, f) -> SolveReport:
    """Unpreconditioned CG on the full space-time system.

    Without an explicit ``cfg.cg_max_iter`` the cap is
    ``max(GLOBAL_CG_MIN_ITER, 10 * m_per_axis)``.
    """
    f = _field(f, grid, mesh)
    eig = _eig_for(mesh, eig)
    max_iter = cfg.cg_max_iter or max(GLOBAL_CG_MIN_ITER, 10 * grid.m_per_axis)

    def apply(p, rows):
        return apply_Kh(grid, mesh, cfg.rho, p[0], eig, cfg.workers).coeffs[None, :]

    start = time.perf_counter()
    x, iters = batched_cg(apply, f.coeffs[None, :], cfg.cg_rel_tol, max_iter)
    elapsed = time.perf_counter() - start
    u = SpaceTimeField(grid, mesh, x[0])
    return SolveReport(
        solution=u,
        cg_iter_mean=float(iters[0]),
        cg_iter_var=0.0,
        wall_time=elapsed,
        residual_norm=_relative_residual(grid, mesh, cfg.rho, u, f, eig, cfg.workers),
        iterations=iters if cfg.record_iterations else None,
    )


def _time_derivative(U):
    # rows of int psi_j' psi_k dt over the free nodes, with U_0 = 0
    out = np.empty_like(U)
    prev = np.vstack([np.zeros_like(U[:1]), U[:-1]])
    out[:-1] = 0.5 * (U[1:] - prev[:-1])
    out[-1] = 0.5 * (U[-1] - prev[-1])
    return out


def reconstruct_control(grid: SpatialGrid, mesh: TemporalMesh, u, with_reaction=False,
                        quad: QuadratureRule | None = None) -> SpaceTimeField:
    """L2(Q) projection of ``z = d_t u_h - Laplace u_h (+ R(u_h))`` onto the ansatz space.

    The Laplacian is tested weakly (integration by parts), so no second
    derivatives of ``u_h`` are needed.
    """
    u = _field(u, grid, mesh)
    op = SpatialOperator(grid)
    mt = temporal_mass_matrix(mesh)
    U = u.blocks
    mu, au = op.mass_and_stiffness_apply(U)
    b = _time_derivative(mu) + mt.matvec(au, axis=0)
    if with_reaction:
        q = SpaceTimeQuadrature(grid, mesh, quad or QuadratureRule())
        b += q.load(lambda sl, t, x: reaction(q.interpolate(U, sl)))
    z = op.mass_solve(mt.solve(b, axis=0))
    return SpaceTimeField(grid, mesh, z)
