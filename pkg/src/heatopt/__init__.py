"""Fast space-time solver for parabolic optimal control with energy regularization."""

from .assembly import (
    QuadratureRule,
    SpaceTimeField,
    assemble_rhs,
    l2q_error,
    l2q_error_and_norm,
)
from .experiments import ExperimentPlan, ResultRow, emit_csv, emit_timing_series, run_study
from .solver import (
    CGConvergenceError,
    SolveReport,
    SolverConfig,
    SolverError,
    apply_Kh,
    reconstruct_control,
    solve_direct,
    solve_global_cg,
)
from .spatial import SpatialGrid, SpatialOperator
from .targets import FunctionTarget, TargetSpec, get_target, reaction
from .temporal import (
    TemporalEigenSystem,
    TemporalMesh,
    assemble_A_ht_dense,
    dst2,
    eigenvalue,
    eigenvalues,
    idst2,
    temporal_mass_matrix,
)

__all__ = [
    "CGConvergenceError", "ExperimentPlan", "FunctionTarget", "QuadratureRule", "ResultRow",
    "SolveReport", "SolverConfig", "SolverError", "SpaceTimeField", "SpatialGrid",
    "SpatialOperator", "TargetSpec", "TemporalEigenSystem", "TemporalMesh", "apply_Kh",
    "assemble_A_ht_dense", "assemble_rhs", "dst2", "eigenvalue", "eigenvalues", "emit_csv",
    "emit_timing_series", "get_target", "idst2", "l2q_error", "l2q_error_and_norm", "reaction",
    "reconstruct_control", "run_study", "solve_direct", "solve_global_cg", "temporal_mass_matrix",
]
