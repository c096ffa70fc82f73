import csv
import math

import numpy as np
import pytest

from heatopt.cli import main
from heatopt.experiments import (
    CSV_COLUMNS,
    ExperimentPlan,
    ResultRow,
    StabilityError,
    check_stability,
    control_table,
    emit_csv,
    emit_timing_series,
    eoc,
    run_study,
)
from heatopt.solver import SolverConfig
from heatopt.spatial import SpatialGrid
from heatopt.temporal import TemporalEigenSystem, TemporalMesh


def row(**kw):
    base = dict(dof=27, nx=4, nt=4, l2_error=1.234567e-3, eoc=None, simulation_time_ms=1.5,
                time_per_dof_ns=12.25, cg_iter_mean=3.0, cg_iter_var=0.25)
    base.update(kw)
    return ResultRow(**base)


class TestPlan:
    def test_defaults_and_counts(self):
        p = ExperimentPlan("smooth")
        assert p.dim == 3 and p.levels == (4, 8, 16, 32)
        assert p.dof(4) == 27 * 4
        assert ExperimentPlan("smooth", "parabolic", (4,)).dof(4) == 27 * 16

    def test_uniform_dof_formula(self):
        p = ExperimentPlan("anisotropic", levels=(8, 16))
        for n in p.levels:
            assert p.dof(n) == (n - 1) ** 3 * n

    @pytest.mark.parametrize("kw", [
        dict(target="discontinuous", levels=(4, 6)),
        dict(target="smooth", levels=(8, 4)),
        dict(target="smooth", levels=()),
        dict(target="smooth", dim=2),
        dict(target="smooth", scaling="cubic"),
        dict(target="smooth", scaling="parabolic", levels=(4, 32)),
        dict(target="unknown"),
        dict(target="smooth", timing_repeats=0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentPlan(**kw)

    def test_budget(self):
        ExperimentPlan("smooth", "parabolic", (4, 8, 16))
        with pytest.raises(ValueError, match="budget"):
            ExperimentPlan("smooth", "parabolic", (4, 8, 16), max_dof=100_000)


def test_eoc():
    assert eoc(4.0, 1.0, 0.5, 0.25) == pytest.approx(2.0)


class TestCsv:
    def test_single_row(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv([row()], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "dof,nx,nt,l2Error,eoc,simulationTime,timePerDof,cgIterMean,cgIterVar"
        assert lines[1] == "27,4,4,1.23457e-03,,1.500,12.250,3.00,0.25"
        assert len(lines) == 2

    def test_no_timing_and_eoc_format(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv([row(), row(nx=8, eoc=1.98765)], path, timing=False)
        rec = list(csv.DictReader(path.open()))
        assert rec[0]["eoc"] == "" and rec[1]["eoc"] == "1.99"
        assert all(r["simulationTime"] == "0.000" and r["timePerDof"] == "0.000" for r in rec)
        assert tuple(rec[0]) == CSV_COLUMNS

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([], tmp_path / "r.csv")
        with pytest.raises(ValueError):
            emit_timing_series([], tmp_path / "t.csv")

    def test_timing_series(self, tmp_path):
        path = tmp_path / "t.csv"
        emit_timing_series([row(), row(dof=343, simulation_time_ms=20.0)], path)
        assert path.read_text() == "dof,simulationTime\n27,1.500\n343,20.000\n"


class TestStudy:
    def test_small_smooth_study(self):
        seen = []
        rows = run_study(ExperimentPlan("smooth", levels=(4, 8)), SolverConfig(1.0),
                         on_level=lambda r, u: seen.append((r.nx, u.grid.n_x)))
        assert [r.nx for r in rows] == [4, 8] and seen == [(4, 4), (8, 8)]
        assert rows[0].eoc is None
        assert rows[1].eoc == pytest.approx(
            math.log(rows[0].l2_error / rows[1].l2_error) / math.log(2.0))
        assert [r.dof for r in rows] == [27 * 4, 343 * 8]
        for r in rows:
            assert r.energy <= 1.01 * r.target_norm_sq
            assert r.residual_norm < 1e-10

    def test_timing_repeats_keep_results(self):
        once = run_study(ExperimentPlan("smooth", levels=(4, 8)))
        thrice = run_study(ExperimentPlan("smooth", levels=(4, 8), timing_repeats=3))
        for a, b in zip(once, thrice):
            assert a.l2_error == b.l2_error and a.cg_iter_mean == b.cg_iter_mean
            assert b.simulation_time_ms > 0

    def test_parabolic_levels(self):
        rows = run_study(ExperimentPlan("anisotropic", "parabolic", (4,)))
        assert rows[0].nt == 16

    def test_stability_guard(self):
        grid, mesh = SpatialGrid(1, 4), TemporalMesh(4)
        u = np.ones(grid.M_x * mesh.N_t)
        from heatopt.assembly import SpaceTimeField

        field = SpaceTimeField(grid, mesh, u)
        eig = TemporalEigenSystem.build(mesh)
        with pytest.raises(StabilityError):
            check_stability(grid, mesh, grid.h_x**2, field, eig, target_norm_sq=1e-6)

    def test_solver_failure_has_level_context(self):
        from heatopt.solver import CGConvergenceError

        with pytest.raises(CGConvergenceError, match="n_x=8"):
            run_study(ExperimentPlan("smooth", levels=(8,)), SolverConfig(1.0, cg_max_iter=1))

    def test_control_table(self):
        rows = []
        run_study(ExperimentPlan("turning-wave", levels=(8,)), on_level=lambda r, u: rows.append(u))
        table = control_table(rows[0], with_reaction=True)
        assert table.shape == (49 * 8, 4)
        assert np.allclose(table[:49, 0], 1 / 8) and np.allclose(table[-1, :3], [1.0, 7 / 8, 7 / 8])


class TestCli:
    def test_study_is_reproducible(self, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"r{k}.csv"
            rc = main(["study", "--target", "smooth", "--levels", "4,8", "--out", str(out), "--no-timing", "-q"])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0].decode().count("\n") == 3

    def test_extra_outputs(self, tmp_path):
        rc = main(["study", "--target", "turning-wave", "--dim", "2", "--levels", "4,8", "--out",
                   str(tmp_path / "r.csv"), "--timing-out", str(tmp_path / "t.csv"),
                   "--control-out", str(tmp_path / "z.csv"), "--threads", "1", "-q"])
        assert rc == 0
        z = (tmp_path / "z.csv").read_text().splitlines()
        assert z[0] == "t,x1,x2,z" and len(z) == 1 + 49 * 8
        t = (tmp_path / "t.csv").read_text().splitlines()
        assert t[0] == "dof,simulationTime" and [int(l.split(",")[0]) for l in t[1:]] == [36, 392]

    def test_invalid_plan_exit_code(self, tmp_path, capsys):
        rc = main(["study", "--target", "discontinuous", "--levels", "4,6", "--out", str(tmp_path / "r.csv")])
        assert rc != 0
        assert "divisible by 4" in capsys.readouterr().err

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        rc = main(["study", "--target", "smooth", "--levels", "8", "--cg-max-iter", "1",
                   "--out", str(tmp_path / "r.csv")])
        assert rc != 0
        assert "CG did not converge" in capsys.readouterr().err

    def test_bad_levels(self):
        with pytest.raises(SystemExit):
            main(["study", "--target", "smooth", "--levels", "a,b", "--out", "x.csv"])
