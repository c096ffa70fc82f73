"""Refinement studies: solve on a sequence of meshes, measure errors and rates, write CSV."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import QuadratureRule, assemble_rhs, l2q_error_and_norm
from .solver import SolverConfig, SolverError, apply_Kh, reconstruct_control, solve_direct
from .spatial import SpatialGrid
from .targets import Kind, get_target
from .temporal import TemporalEigenSystem, TemporalMesh

CSV_COLUMNS = (
    "dof", "nx", "nt", "l2Error", "eoc", "simulationTime", "timePerDof", "cgIterMean", "cgIterVar",
)
TIMING_COLUMNS = ("dof", "simulationTime")
SCALINGS = ("uniform", "parabolic")
#: default bound on N_t * M_x
DEFAULT_MAX_DOF = 5_000_000
#: relative slack allowed in the discrete stability bound
STABILITY_SLACK = 0.01


class StabilityError(SolverError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    target: str
    scaling: str = "uniform"
    levels: tuple = (4, 8, 16, 32)
    dim: int | None = None
    T: float = 1.0
    max_dof: int = DEFAULT_MAX_DOF
    quad: QuadratureRule = field(default_factory=QuadratureRule)
    # each level is solved this many times and the fastest run is reported
    timing_repeats: int = 1

    def __post_init__(self):
        tgt = get_target(self.target, self.T)
        if self.dim is None:
            object.__setattr__(self, "dim", tgt.dim)
        elif self.dim != tgt.dim:
            raise ValueError(f"target {self.target!r} is {tgt.dim}-dimensional, got dim={self.dim}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {self.scaling!r}")
        levels = tuple(int(n) for n in self.levels)
        if not levels:
            raise ValueError("at least one level is required")
        if any(n < 2 for n in levels):
            raise ValueError("every n_x must be at least 2")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if tgt.kind is Kind.DISCONTINUOUS and any(n % 4 for n in levels):
            raise ValueError("the discontinuous target needs n_x divisible by 4")
        object.__setattr__(self, "levels", levels)
        if self.timing_repeats < 1:
            raise ValueError("timing_repeats must be at least 1")
        too_big = [n for n in levels if self.dof(n) > self.max_dof]
        if too_big:
            raise ValueError(
                f"levels {too_big} exceed the budget of {self.max_dof} unknowns "
                f"({self.scaling} scaling)"
            )

    @property
    def target_spec(self):
        return get_target(self.target, self.T)

    def n_t(self, n_x):
        return n_x if self.scaling == "uniform" else n_x * n_x

    def dof(self, n_x):
        return (n_x - 1) ** self.dim * self.n_t(n_x)


@dataclass
class ResultRow:
    dof: int
    nx: int
    nt: int
    l2_error: float
    eoc: float | None
    simulation_time_ms: float
    time_per_dof_ns: float
    cg_iter_mean: float
    cg_iter_var: float
    # reported alongside, not part of the CSV schema
    assembly_time_ms: float = 0.0
    residual_norm: float = 0.0
    energy: float = 0.0
    target_norm_sq: float = 0.0


def eoc(e_prev, e_curr, h_prev, h_curr):
    return math.log(e_prev / e_curr) / math.log(h_prev / h_curr)


def check_stability(grid, mesh, rho, u, eig, target_norm_sq, slack=STABILITY_SLACK):
    """Discrete ``||u||^2 + rho ||u||_D^2 <= ||target||^2`` up to ``slack``.

    Returns ``u^T K_h u``.
    """
    energy = float(u.coeffs @ apply_Kh(grid, mesh, rho, u, eig).coeffs)
    bound = (1.0 + slack) * target_norm_sq
    if not energy <= bound:
        raise StabilityError(
            f"stability bound violated: u^T K u = {energy:.6e} > {bound:.6e}"
        )
    return energy


def run_study(plan: ExperimentPlan, cfg: SolverConfig | None = None, on_level=None):
    """Run every level of ``plan`` with ``rho = h_x**2``.

    The reported simulation time is eigenvalue setup plus solve, minimised
    over ``plan.timing_repeats`` runs.

    ``cfg`` supplies the CG settings; its ``rho`` is replaced per level.
    ``on_level(row, solution)`` is called after each level.
    """
    cfg = cfg or SolverConfig(rho=1.0)
    target = plan.target_spec
    rows = []
    for n_x in plan.levels:
        grid = SpatialGrid(plan.dim, n_x)
        mesh = TemporalMesh(plan.n_t(n_x), plan.T)
        level_cfg = replace(cfg, rho=grid.h_x**2)
        try:
            t0 = time.perf_counter()
            f = assemble_rhs(grid, mesh, target, plan.quad)
            t_asm = time.perf_counter() - t0

            sim = math.inf
            for _ in range(plan.timing_repeats):
                t0 = time.perf_counter()
                eig = TemporalEigenSystem.build(mesh)
                t_eig = time.perf_counter() - t0
                report = solve_direct(grid, mesh, eig, level_cfg, f)
                sim = min(sim, t_eig + report.wall_time)

            err, norm = l2q_error_and_norm(report.solution, target, plan.quad)
            energy = check_stability(grid, mesh, level_cfg.rho, report.solution, eig, norm * norm)
        except SolverError as exc:
            raise exc.with_context(f"level n_x={n_x}, n_t={mesh.n_t}") from exc

        dof = grid.M_x * mesh.N_t
        rate = None
        if rows:
            rate = eoc(rows[-1].l2_error, err, 1.0 / rows[-1].nx, grid.h_x)
        row = ResultRow(
            dof=dof, nx=n_x, nt=mesh.n_t, l2_error=err, eoc=rate,
            simulation_time_ms=1e3 * sim, time_per_dof_ns=1e9 * sim / dof,
            cg_iter_mean=report.cg_iter_mean, cg_iter_var=report.cg_iter_var,
            assembly_time_ms=1e3 * t_asm, residual_norm=report.residual_norm,
            energy=energy, target_norm_sq=norm * norm,
        )
        rows.append(row)
        if on_level is not None:
            on_level(row, report.solution)
    return rows


def _csv_record(row: ResultRow, timing: bool):
    return [
        str(row.dof),
        str(row.nx),
        str(row.nt),
        f"{row.l2_error:.5e}",
        "" if row.eoc is None else f"{row.eoc:.2f}",
        f"{row.simulation_time_ms if timing else 0.0:.3f}",
        f"{row.time_per_dof_ns if timing else 0.0:.3f}",
        f"{row.cg_iter_mean:.2f}",
        f"{row.cg_iter_var:.2f}",
    ]


def emit_csv(rows, path, timing=True):
    """Write the convergence table; ``timing=False`` zeroes the time columns."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(_csv_record(row, timing))


def emit_timing_series(rows, path):
    """Two-column ``dof,simulationTime`` series for complexity plots."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for row in rows:
            w.writerow([str(row.dof), f"{row.simulation_time_ms:.3f}"])


def control_table(solution, with_reaction=False, quad=None):
    """Nodal values of the reconstructed control as ``(t, x_1..x_d, z)`` rows."""
    grid, mesh = solution.grid, solution.mesh
    z = reconstruct_control(grid, mesh, solution, with_reaction, quad)
    xs = grid.node_coordinates()
    ts = np.repeat(mesh.nodes(), grid.M_x)
    return np.column_stack([ts, np.tile(xs, (mesh.N_t, 1)), z.coeffs])


def emit_control(solution, path, with_reaction=False, quad=None):
    table = control_table(solution, with_reaction, quad)
    d = solution.grid.dim
    header = ",".join(["t"] + [f"x{a + 1}" for a in range(d)] + ["z"])
    np.savetxt(Path(path), table, delimiter=",", header=header, comments="", fmt="%.10e")
