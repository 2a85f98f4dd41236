"""Command-line entry point.

`vpinn run` trains one configuration and writes its table row, figure
data and parameter snapshot; `vpinn reproduce-table` sweeps every row
of one of the five benchmark tables across seeds and diffs the medians
against the bundled published reference values.
"""

import argparse
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .estimator import ParabolicVPINNSolver, VPINNSolver
from .network import save_params
from .problems import PROBLEM_KEYS
from .report import (
    ErrorReport,
    emit_figure_data,
    emit_level_stats,
    emit_table,
    run_stem,
)
from .reference_values import REFERENCE_TABLES, TABLE_PROBLEMS

__all__ = ["main", "run_config", "reproduce_table"]


def _fit_solver(cfg: RunConfig):
    common = dict(
        problem=cfg.problem,
        epsilon=cfg.epsilon,
        mu=cfg.mu,
        n_test=cfg.n_test,
        n_quad=cfg.n_quad,
        widths=cfg.widths,
        adam_epochs=cfg.adam_epochs,
        lbfgs_epochs=cfg.lbfgs_epochs,
        seed=cfg.seed,
        residual_mode=cfg.residual_mode,
        loss_mode=cfg.loss_mode,
    )
    if cfg.is_parabolic:
        solver = ParabolicVPINNSolver(
            n_time_steps=cfg.n_time_steps, final_time=cfg.final_time, **common
        )
    else:
        solver = VPINNSolver(**common)
    return solver.fit()


def run_config(cfg: RunConfig, write_artifacts: bool = True) -> ErrorReport:
    """Execute one full run; returns the table row and (optionally)
    writes every artifact below cfg.out_dir."""
    cfg = cfg.validate()
    solver = _fit_solver(cfg)
    report = solver.report_

    if write_artifacts and cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = run_stem(solver.spec_)
        emit_table([report], out / f"{stem}_report.csv", out / f"{stem}_report.txt")
        aborted = solver.stop_reason_ in ("nan-loss", "line-search-failure")
        emit_figure_data(
            out,
            solver.spec_,
            solver.params_,
            solver.loss_trace_,
            aborted=aborted,
            parabolic_result=getattr(solver, "result_", None),
        )
        if cfg.is_parabolic:
            emit_level_stats(out, solver.spec_, solver.level_stats_)
        save_params(solver.params_, out / f"{stem}_params.json")
        (out / f"{stem}_config.txt").write_text(cfg.to_text(), encoding="utf-8")
    return report


def _sweep_worker(cfg: RunConfig) -> ErrorReport:
    return run_config(cfg, write_artifacts=cfg.out_dir is not None)


def _median_report(reports: list[ErrorReport]) -> ErrorReport:
    first = reports[0]
    med = lambda attr: statistics.median(getattr(r, attr) for r in reports)
    return ErrorReport(
        problem=first.problem,
        epsilon=first.epsilon,
        mu=first.mu,
        max_err=med("max_err"),
        rel_max_err=med("rel_max_err"),
        l2_err=med("l2_err"),
        rel_l2_err=med("rel_l2_err"),
        final_loss=med("final_loss"),
        metadata={"seeds": [r.metadata.get("seed") for r in reports]},
    )


def reproduce_table(
    table_id: int,
    seeds: list[int] | None = None,
    workers: int = 1,
    out_dir: str | None = None,
    overrides: dict | None = None,
) -> Path | None:
    """Run every (epsilon, mu) row of one benchmark table for each seed.

    Writes one table CSV per seed, a median aggregate, and a diff CSV
    against the bundled reference values.  Per-row failures are logged
    and the sweep continues.
    """
    if table_id not in REFERENCE_TABLES:
        raise ValueError(f"table must be one of {sorted(REFERENCE_TABLES)}")
    seeds = list(seeds) if seeds else [0]
    overrides = overrides or {}
    problem = TABLE_PROBLEMS[table_id]
    rows = list(REFERENCE_TABLES[table_id])

    jobs = []
    for seed in seeds:
        for eps, mu in rows:
            cfg = RunConfig(problem=problem, epsilon=eps, mu=mu, seed=seed, **overrides)
            if out_dir is not None:
                cfg = replace(cfg, out_dir=str(Path(out_dir) / f"seed{seed}"))
            jobs.append(cfg)

    results: dict[tuple, ErrorReport] = {}
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_sweep_worker, cfg): cfg for cfg in jobs}
            for fut, cfg in futures.items():
                try:
                    results[(cfg.seed, cfg.epsilon, cfg.mu)] = fut.result()
                except Exception as err:  # keep sweeping, record the row
                    failures.append((cfg, str(err)))
    else:
        for cfg in jobs:
            try:
                results[(cfg.seed, cfg.epsilon, cfg.mu)] = _sweep_worker(cfg)
            except Exception as err:
                failures.append((cfg, str(err)))

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    per_seed = {}
    for seed in seeds:
        reports = [
            results[(seed, eps, mu)] for eps, mu in rows if (seed, eps, mu) in results
        ]
        per_seed[seed] = reports
        if out is not None and reports:
            emit_table(reports, out / f"table{table_id}_seed{seed}.csv")

    medians = []
    for eps, mu in rows:
        bucket = [
            results[(s, eps, mu)] for s in seeds if (s, eps, mu) in results
        ]
        if bucket:
            medians.append(_median_report(bucket))

    if medians:
        print(f"table {table_id} medians over seeds {seeds}:")
        print(emit_table(medians)[1], end="")

    diff_path = None
    if out is not None and medians:
        emit_table(medians, out / f"table{table_id}_median.csv")
        diff_path = out / f"table{table_id}_diff.csv"
        _write_diff(diff_path, table_id, medians)
        if failures:
            lines = ["problem,epsilon,mu,seed,error"]
            for cfg, msg in failures:
                mu_s = "" if cfg.mu is None else f"{cfg.mu:.0e}"
                lines.append(
                    f"{cfg.problem},{cfg.epsilon:.0e},{mu_s},{cfg.seed},\"{msg}\""
                )
            (out / f"table{table_id}_failures.csv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )
    for cfg, msg in failures:
        print(f"row failed: {cfg.problem} eps={cfg.epsilon:g} mu={cfg.mu} "
              f"seed={cfg.seed}: {msg}", file=sys.stderr)
    return diff_path


def _write_diff(path: Path, table_id: int, medians: list[ErrorReport]) -> None:
    header = (
        "epsilon,mu,loss,max,rel_max,l2,rel_l2,"
        "ref_loss,ref_max,ref_rel_max,ref_l2,ref_rel_l2,max_over_ref"
    )
    lines = [header]
    for rep in medians:
        ref = REFERENCE_TABLES[table_id][(rep.epsilon, rep.mu)]
        mu_s = "" if rep.mu is None else f"{rep.mu:.4e}"
        ours = [rep.final_loss, rep.max_err, rep.rel_max_err, rep.l2_err, rep.rel_l2_err]
        ratio = rep.max_err / ref[1]
        cells = [f"{rep.epsilon:.4e}", mu_s]
        cells += [f"{v:.4e}" for v in ours]
        cells += [f"{v:.4e}" for v in ref]
        cells.append(f"{ratio:.4e}")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpinn",
        description="Weak-form neural solver for singularly perturbed problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one configuration")
    run_p.add_argument("--config", help="flat key=value config file; flags override it")
    run_p.add_argument("--problem", choices=sorted(PROBLEM_KEYS), default=None)
    run_p.add_argument("--epsilon", type=float, default=None)
    run_p.add_argument("--mu", type=float, default=None)
    run_p.add_argument("--test-functions", type=int, default=None, dest="n_test")
    run_p.add_argument("--quad-points", type=int, default=None, dest="n_quad")
    run_p.add_argument("--widths", default=None, help="comma-separated layer widths")
    run_p.add_argument("--adam-epochs", type=int, default=None)
    run_p.add_argument("--lbfgs-epochs", type=int, default=None)
    run_p.add_argument("--time-steps", type=int, default=None, dest="n_time_steps")
    run_p.add_argument("--final-time", type=float, default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--loss", choices=["integral", "mse"], default=None)
    run_p.add_argument("--residual", choices=["strong", "ibp"], default=None)
    run_p.add_argument("--out", default=None, help="artifact directory")

    rep_p = sub.add_parser("reproduce-table", help="sweep one benchmark table")
    rep_p.add_argument("--table", type=int, required=True, choices=sorted(REFERENCE_TABLES))
    rep_p.add_argument("--seeds", type=int, nargs="+", default=[0])
    rep_p.add_argument("--workers", type=int, default=1)
    rep_p.add_argument("--out", default=None)
    rep_p.add_argument("--test-functions", type=int, default=None, dest="n_test")
    rep_p.add_argument("--quad-points", type=int, default=None, dest="n_quad")
    rep_p.add_argument("--adam-epochs", type=int, default=None)
    rep_p.add_argument("--lbfgs-epochs", type=int, default=None)
    rep_p.add_argument("--time-steps", type=int, default=None, dest="n_time_steps")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_text(Path(args.config).read_text()) if args.config else RunConfig()
    updates = {}
    mapping = {
        "problem": "problem",
        "epsilon": "epsilon",
        "mu": "mu",
        "n_test": "n_test",
        "n_quad": "n_quad",
        "adam_epochs": "adam_epochs",
        "lbfgs_epochs": "lbfgs_epochs",
        "n_time_steps": "n_time_steps",
        "final_time": "final_time",
        "seed": "seed",
        "loss": "loss_mode",
        "residual": "residual_mode",
        "out": "out_dir",
    }
    for arg_name, field_name in mapping.items():
        value = getattr(args, arg_name)
        if value is not None:
            updates[field_name] = value
    if args.widths is not None:
        updates["widths"] = [int(w) for w in args.widths.split(",")]
    return replace(cfg, **updates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _config_from_args(args)
            report = run_config(cfg)
            _, text = emit_table([report])
            print(text, end="")
            if report.mu is not None:
                from .problems import classify_regime

                reg = classify_regime(report.epsilon, report.mu)
                print(
                    f"regime: {reg.regime} "
                    f"(lambda0={reg.lambda0:.4e}, lambda1={reg.lambda1:.4e})"
                )
            return 0

        overrides = {
            k: v
            for k, v in (
                ("n_test", args.n_test),
                ("n_quad", args.n_quad),
                ("adam_epochs", args.adam_epochs),
                ("lbfgs_epochs", args.lbfgs_epochs),
                ("n_time_steps", args.n_time_steps),
            )
            if v is not None
        }
        reproduce_table(
            args.table, seeds=args.seeds, workers=args.workers,
            out_dir=args.out, overrides=overrides,
        )
        return 0
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
