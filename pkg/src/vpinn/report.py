"""Error norms, table emission and figure-data export.

All errors are measured on a 1001-point uniform grid, independent of
the training quadrature, with trapezoid weights for the discrete L2
norm; relative errors divide by the same norms of the exact solution.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import MlpParams, trial_values
from .problems import ProblemSpec, exact

__all__ = [
    "ErrorReport",
    "compute_errors",
    "emit_table",
    "emit_figure_data",
    "emit_level_stats",
]

EVAL_POINTS = 1001

_TABLE_COLUMNS = ("epsilon", "mu", "loss", "max", "rel_max", "l2", "rel_l2")


@dataclass
class ErrorReport:
    """One table row: norms of the error plus the run's final loss."""

    problem: str
    epsilon: float
    mu: float | None
    max_err: float
    rel_max_err: float
    l2_err: float
    rel_l2_err: float
    final_loss: float
    degenerate_norm: bool = False
    metadata: dict = field(default_factory=dict)


def _trapezoid_weights(n: int) -> np.ndarray:
    h = 1.0 / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return w


def compute_errors(
    approx,
    spec: ProblemSpec,
    t: float | None = None,
    final_loss: float = math.nan,
    eval_points: int = EVAL_POINTS,
    **metadata,
) -> ErrorReport:
    """Norms of (exact - approx) on a uniform grid.

    `approx` is either trained network parameters or any callable
    mapping an array of x-values to solution values.  For parabolic
    problems pass the evaluation time (defaults to the final time).
    """
    if spec.is_parabolic and t is None:
        t = spec.T
    xs = np.linspace(0.0, 1.0, eval_points)
    if isinstance(approx, MlpParams):
        u_hat = trial_values(approx, xs)
    else:
        u_hat = np.asarray(approx(xs), dtype=np.float64)
    u_ex = np.asarray(exact(spec, xs, t), dtype=np.float64)

    diff = np.abs(u_ex - u_hat)
    w = _trapezoid_weights(eval_points)
    max_err = float(diff.max())
    l2_err = float(np.sqrt(np.dot(w, diff * diff)))
    scale_max = float(np.abs(u_ex).max())
    scale_l2 = float(np.sqrt(np.dot(w, u_ex * u_ex)))

    degenerate = scale_max == 0.0 or scale_l2 == 0.0
    rel_max = max_err / scale_max if scale_max > 0.0 else math.nan
    rel_l2 = l2_err / scale_l2 if scale_l2 > 0.0 else math.nan

    return ErrorReport(
        problem=spec.key,
        epsilon=spec.epsilon,
        mu=spec.mu,
        max_err=max_err,
        rel_max_err=rel_max,
        l2_err=l2_err,
        rel_l2_err=rel_l2,
        final_loss=final_loss,
        degenerate_norm=degenerate,
        metadata=dict(metadata),
    )


def _sci(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.4e}"  # 5 significant digits, matching the tables


def _row_values(r: ErrorReport) -> list[str]:
    return [
        _sci(r.epsilon),
        _sci(r.mu) if r.mu is not None else "",
        _sci(r.final_loss),
        _sci(r.max_err),
        _sci(r.rel_max_err),
        _sci(r.l2_err),
        _sci(r.rel_l2_err),
    ]


def _sorted_reports(reports) -> list[ErrorReport]:
    # descending epsilon then descending mu, the order the tables use
    return sorted(
        reports,
        key=lambda r: (-r.epsilon, -(r.mu if r.mu is not None else 0.0)),
    )


def emit_table(reports, csv_path=None, text_path=None) -> tuple[str, str]:
    """Render reports as (csv, aligned text table); optionally write both."""
    if not reports:
        raise ValueError("nothing to tabulate")
    rows = [_row_values(r) for r in _sorted_reports(reports)]
    header = list(_TABLE_COLUMNS)
    csv_lines = [",".join(header)] + [",".join(row) for row in rows]
    csv_text = "\n".join(csv_lines) + "\n"

    widths = [
        max(len(header[j]), max(len(row[j]) for row in rows)) for j in range(len(header))
    ]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    text_lines = [fmt(header), fmt(["-" * w for w in widths])]
    text_lines += [fmt(row) for row in rows]
    text = "\n".join(text_lines) + "\n"

    if csv_path is not None:
        Path(csv_path).write_text(csv_text, encoding="utf-8")
    if text_path is not None:
        Path(text_path).write_text(text, encoding="utf-8")
    return csv_text, text


def run_stem(spec: ProblemSpec) -> str:
    mu = f"{spec.mu:.0e}" if spec.mu is not None else ""
    return f"{spec.key}_{spec.epsilon:.0e}_{mu}"


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> Path:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_sci(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def emit_figure_data(
    out_dir,
    spec: ProblemSpec,
    approx,
    loss_trace: np.ndarray,
    aborted: bool = False,
    parabolic_result=None,
    eval_points: int = EVAL_POINTS,
) -> list[Path]:
    """Write the plot-ready CSV set for one run.

    Steady runs produce solution, pointwise-error and loss-trace files;
    parabolic runs add a surface file over (x, t).  Aborted runs keep
    the truncated trace and gain a flag column.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = run_stem(spec)
    t_final = spec.T if spec.is_parabolic else None

    xs = np.linspace(0.0, 1.0, eval_points)
    u_hat = trial_values(approx, xs) if isinstance(approx, MlpParams) else np.asarray(approx(xs))
    u_ex = np.asarray(exact(spec, xs, t_final), dtype=np.float64)

    paths = [
        _write_csv(out / f"{stem}_solution.csv", ["x", "exact", "vpinn"], [xs, u_ex, u_hat]),
        _write_csv(out / f"{stem}_error.csv", ["x", "abs_err"], [xs, np.abs(u_ex - u_hat)]),
    ]

    loss_trace = np.asarray(loss_trace, dtype=np.float64)
    epochs = np.arange(loss_trace.size)
    if aborted:
        flag = np.ones(loss_trace.size, dtype=int)
        paths.append(
            _write_csv(out / f"{stem}_loss.csv", ["epoch", "loss", "aborted"], [epochs, loss_trace, flag])
        )
    else:
        paths.append(_write_csv(out / f"{stem}_loss.csv", ["epoch", "loss"], [epochs, loss_trace]))

    if spec.is_parabolic:
        if parabolic_result is None:
            raise ValueError("parabolic runs need the level solutions for the surface file")
        xcol, tcol, ecol, vcol = [], [], [], []
        for lvl in parabolic_result.levels:
            xq = parabolic_result.quad_points
            xcol.append(xq)
            tcol.append(np.full(xq.size, lvl.t))
            ecol.append(np.asarray(exact(spec, xq, lvl.t)))
            vcol.append(lvl.values)
        paths.append(
            _write_csv(
                out / f"{stem}_surface.csv",
                ["x", "t", "exact", "vpinn"],
                [np.concatenate(xcol), np.concatenate(tcol), np.concatenate(ecol), np.concatenate(vcol)],
            )
        )
    return paths


def emit_level_stats(out_dir, spec: ProblemSpec, level_stats) -> Path:
    """Per-level convergence CSV: n, t_n, loss, max_err, l2_err."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{run_stem(spec)}_levels.csv"
    lines = ["n,t,loss,max_err,l2_err"]
    for s in level_stats:
        lines.append(
            f"{s['n']},{_sci(s['t'])},{_sci(s['loss'])},{_sci(s['max_err'])},{_sci(s['l2_err'])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
