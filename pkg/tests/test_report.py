import math

import numpy as np
import pytest

from vpinn.network import init_params
from vpinn.optim import TrainSchedule
from vpinn.problems import PARABOLIC_ONE_PARAM, ProblemSpec, exact, make_problem
from vpinn.report import (
    compute_errors,
    emit_figure_data,
    emit_level_stats,
    emit_table,
    run_stem,
)
from vpinn.timestepper import TimeGrid, solve_parabolic
from vpinn.weakform import build_basis, build_quadrature


class TestComputeErrors:
    def test_exact_approximation_gives_zero_errors(self):
        spec = make_problem("cd1", 1e-1)
        rep = compute_errors(lambda xs: exact(spec, xs), spec, final_loss=0.0)
        assert rep.max_err == 0.0
        assert rep.l2_err == 0.0
        assert rep.rel_max_err == 0.0
        assert rep.rel_l2_err == 0.0
        assert not rep.degenerate_norm

    def test_zero_approximation_normalizes_to_one(self):
        spec = make_problem("rd1", 1e-1)
        rep = compute_errors(lambda xs: np.zeros_like(xs), spec)
        xs = np.linspace(0, 1, 1001)
        assert math.isclose(rep.max_err, float(np.abs(exact(spec, xs)).max()), rel_tol=1e-15)
        assert math.isclose(rep.rel_max_err, 1.0, rel_tol=1e-15)

    def test_l2_never_exceeds_max_err(self):
        spec = make_problem("cd1", 1e-1)
        rng = np.random.default_rng(4)
        for _ in range(10):
            c = rng.normal(size=3)
            rep = compute_errors(
                lambda xs: c[0] + c[1] * xs + c[2] * np.sin(7 * xs), spec
            )
            assert rep.l2_err <= rep.max_err + 1e-15

    def test_relative_and_absolute_max_are_consistent(self):
        spec = make_problem("cd1", 1e-2)
        rep = compute_errors(lambda xs: 0.5 * exact(spec, xs), spec)
        xs = np.linspace(0, 1, 1001)
        scale = float(np.abs(exact(spec, xs)).max())
        assert abs(rep.rel_max_err * scale - rep.max_err) < 1e-14

    def test_degenerate_exact_norm_flags_nan(self):
        spec = ProblemSpec(
            key="parab1", kind=PARABOLIC_ONE_PARAM, epsilon=0.5, mu=None,
            b=lambda x: x * 0.0, c=lambda x: x * 0.0, profile=lambda x: x * 0.0,
        )
        rep = compute_errors(lambda xs: xs * 0.0 + 0.1, spec, t=1.0)
        assert rep.degenerate_norm
        assert math.isnan(rep.rel_max_err) and math.isnan(rep.rel_l2_err)
        assert rep.max_err == 0.1

    def test_accepts_network_params(self):
        spec = make_problem("cd1", 1e-1)
        params = init_params([1, 4, 1], seed=0)
        rep = compute_errors(params, spec, final_loss=1.0, seed=0)
        assert np.isfinite(rep.max_err)
        assert rep.metadata["seed"] == 0

    def test_parabolic_defaults_to_final_time(self):
        spec = make_problem("parab1", 1e-1)
        rep_default = compute_errors(lambda xs: xs * 0.0, spec)
        rep_final = compute_errors(lambda xs: xs * 0.0, spec, t=1.0)
        assert rep_default.max_err == rep_final.max_err


def _dummy_report(eps, mu=None, **kw):
    spec = make_problem("cd1", eps) if mu is None else make_problem("tp1", eps, mu)
    return compute_errors(lambda xs: xs * 0.0, spec, final_loss=kw.get("loss", 1e-8))


class TestEmitTable:
    def test_single_report_gives_header_plus_one_row(self):
        csv_text, table_text = emit_table([_dummy_report(1e-1)])
        lines = csv_text.strip().split("\n")
        assert lines[0] == "epsilon,mu,loss,max,rel_max,l2,rel_l2"
        assert len(lines) == 2
        assert len(table_text.strip().split("\n")) == 3

    def test_rows_sorted_descending_epsilon(self):
        reports = [_dummy_report(e) for e in (1e-3, 1e-1, 1e-2)]
        csv_text, _ = emit_table(reports)
        eps_col = [row.split(",")[0] for row in csv_text.strip().split("\n")[1:]]
        assert eps_col == ["1.0000e-01", "1.0000e-02", "1.0000e-03"]

    def test_mu_column_blank_for_one_parameter(self):
        csv_text, _ = emit_table([_dummy_report(1e-1)])
        assert csv_text.strip().split("\n")[1].split(",")[1] == ""

    def test_mu_column_populated_for_two_parameter(self):
        csv_text, _ = emit_table([_dummy_report(1e-2, 1e-3)])
        assert csv_text.strip().split("\n")[1].split(",")[1] == "1.0000e-03"

    def test_five_significant_digits(self):
        rep = _dummy_report(1e-1)
        rep.final_loss = 4.64323e-08
        csv_text, _ = emit_table([rep])
        assert "4.6432e-08" in csv_text

    def test_writes_files(self, tmp_path):
        emit_table([_dummy_report(1e-1)], tmp_path / "t.csv", tmp_path / "t.txt")
        assert (tmp_path / "t.csv").exists() and (tmp_path / "t.txt").exists()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            emit_table([])


class TestEmitFigureData:
    def test_steady_run_writes_three_files(self, tmp_path):
        spec = make_problem("cd1", 1e-1)
        params = init_params([1, 4, 1], seed=0)
        paths = emit_figure_data(tmp_path, spec, params, np.array([1.0, 0.5, 0.1]))
        assert len(paths) == 3
        names = sorted(p.name for p in paths)
        stem = run_stem(spec)
        assert names == sorted(
            [f"{stem}_solution.csv", f"{stem}_error.csv", f"{stem}_loss.csv"]
        )
        loss_lines = (tmp_path / f"{stem}_loss.csv").read_text().strip().split("\n")
        assert loss_lines[0] == "epoch,loss"
        assert len(loss_lines) == 4

    def test_parabolic_run_writes_four_files(self, tmp_path):
        spec = make_problem("parab1", 1e-1)
        basis, quad = build_basis(3), build_quadrature(12)
        result = solve_parabolic(
            spec, basis, quad, TimeGrid(n_steps=2), TrainSchedule(0, 0), widths=[1, 3, 1]
        )
        paths = emit_figure_data(
            tmp_path, spec, result.final_params, np.array([1.0]),
            parabolic_result=result,
        )
        assert len(paths) == 4
        surface = [p for p in paths if p.name.endswith("_surface.csv")][0]
        lines = surface.read_text().strip().split("\n")
        assert lines[0] == "x,t,exact,vpinn"
        assert len(lines) == 1 + 12 * 3  # quad points x (level 0 + 2 levels)

    def test_parabolic_needs_level_solutions(self, tmp_path):
        spec = make_problem("parab1", 1e-1)
        with pytest.raises(ValueError):
            emit_figure_data(
                tmp_path, spec, init_params([1, 3, 1], 0), np.array([1.0])
            )

    def test_aborted_run_gets_flag_column(self, tmp_path):
        spec = make_problem("cd1", 1e-1)
        params = init_params([1, 4, 1], seed=0)
        paths = emit_figure_data(
            tmp_path, spec, params, np.array([1.0, 0.7]), aborted=True
        )
        loss_file = [p for p in paths if p.name.endswith("_loss.csv")][0]
        lines = loss_file.read_text().strip().split("\n")
        assert lines[0] == "epoch,loss,aborted"
        assert len(lines) == 3

    def test_reemission_is_byte_identical(self, tmp_path):
        spec = make_problem("cd1", 1e-1)
        params = init_params([1, 4, 1], seed=0)
        trace = np.array([3.0, 2.0, 1.0])
        first = {
            p.name: p.read_bytes()
            for p in emit_figure_data(tmp_path / "a", spec, params, trace)
        }
        second = {
            p.name: p.read_bytes()
            for p in emit_figure_data(tmp_path / "b", spec, params, trace)
        }
        assert first == second


class TestEmitLevelStats:
    def test_writes_per_level_rows(self, tmp_path):
        spec = make_problem("parab1", 1e-1)
        stats = [
            {"n": 1, "t": 0.5, "loss": 1e-9, "max_err": 1e-4, "l2_err": 5e-5},
            {"n": 2, "t": 1.0, "loss": 2e-9, "max_err": 2e-4, "l2_err": 6e-5},
        ]
        path = emit_level_stats(tmp_path, spec, stats)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "n,t,loss,max_err,l2_err"
        assert len(lines) == 3
        assert lines[1].startswith("1,")
