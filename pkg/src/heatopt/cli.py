"""Command-line entry point: ``heatopt study ...``."""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    DEFAULT_MAX_DOF,
    SCALINGS,
    ExperimentPlan,
    emit_control,
    emit_csv,
    emit_timing_series,
    run_study,
)
from .solver import SolverConfig, SolverError
from .targets import TARGET_NAMES, Kind


def _levels(text):
    try:
        levels = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}") from None
    if not levels:
        raise argparse.ArgumentTypeError("level list is empty")
    return levels


def build_parser():
    parser = argparse.ArgumentParser(
        prog="heatopt",
        description="Space-time optimal control of the heat equation with energy regularization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    st = sub.add_parser("study", help="run a refinement study and write a convergence table")
    st.add_argument("--target", required=True, choices=TARGET_NAMES)
    st.add_argument("--dim", type=int, default=None, help="spatial dimension (default: the target's)")
    st.add_argument("--scaling", choices=SCALINGS, default="uniform",
                    help="uniform: n_t = n_x, parabolic: n_t = n_x^2")
    st.add_argument("--levels", type=_levels, default=[4, 8, 16, 32],
                    help="comma separated n_x values (default: 4,8,16,32)")
    st.add_argument("--T", type=float, default=1.0, help="final time")
    st.add_argument("--cg-tol", type=float, default=1e-12, help="relative CG tolerance")
    st.add_argument("--cg-max-iter", type=int, default=None)
    st.add_argument("--max-dof", type=int, default=DEFAULT_MAX_DOF,
                    help="reject levels with more space-time unknowns than this")
    st.add_argument("--out", required=True, help="convergence table (CSV)")
    st.add_argument("--timing-out", default=None, help="optional dof,simulationTime series (CSV)")
    st.add_argument("--control-out", default=None,
                    help="reconstructed control on the finest level (CSV: t,x1..xd,z)")
    st.add_argument("--repeat", type=int, default=1,
                    help="solve each level this many times and report the fastest")
    st.add_argument("--no-timing", action="store_true",
                    help="write zeros in the time columns for reproducible files")
    st.add_argument("--threads", type=int, default=None, help="worker threads for the sine transforms")
    st.add_argument("-q", "--quiet", action="store_true")
    return parser


def _study(args):
    plan = ExperimentPlan(
        target=args.target, scaling=args.scaling, levels=tuple(args.levels),
        dim=args.dim, T=args.T, max_dof=args.max_dof, timing_repeats=args.repeat,
    )
    cfg = SolverConfig(rho=1.0, cg_rel_tol=args.cg_tol, cg_max_iter=args.cg_max_iter,
                       workers=args.threads)
    finest = {}

    def report(row, solution):
        finest["u"] = solution
        if not args.quiet:
            rate = "" if row.eoc is None else f"{row.eoc:.2f}"
            print(
                f"n_x={row.nx:4d} n_t={row.nt:6d} dof={row.dof:9d} "
                f"error={row.l2_error:.5e} eoc={rate:>5} "
                f"solve={row.simulation_time_ms:10.3f} ms assembly={row.assembly_time_ms:10.3f} ms "
                f"cg={row.cg_iter_mean:.2f}",
                flush=True,
            )

    rows = run_study(plan, cfg, on_level=report)
    emit_csv(rows, args.out, timing=not args.no_timing)
    if args.timing_out:
        emit_timing_series(rows, args.timing_out)
    if args.control_out:
        wave = plan.target_spec.kind is Kind.TURNING_WAVE
        emit_control(finest["u"], args.control_out, with_reaction=wave, quad=plan.quad)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "study":
            _study(args)
    except (SolverError, ValueError, OSError) as exc:
        print(f"heatopt: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
