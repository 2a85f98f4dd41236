"""Backward-Euler outer loop for the parabolic problems.

One network is trained per time level against the weak form of
(u - u_prev)/dt + spatial operator - r(x, t_n); the previous level is
frozen as plain values on the quadrature grid so no tape state survives
across levels.  Levels are strictly sequential.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import Jet2, Tape
from .network import MlpParams, init_params, trial_values
from .optim import TrainSchedule, train
from .problems import ProblemSpec, exact, initial_values
from .weakform import QuadRule, TestBasis, strong_residual_node

__all__ = [
    "TimeGrid",
    "LevelSolution",
    "ParabolicResult",
    "TimeSteppingError",
    "init_level0",
    "step_residual",
    "solve_parabolic",
]

DEFAULT_WIDTHS = [1, 20, 20, 20, 20, 1]


class TimeSteppingError(RuntimeError):
    """Optimizer abort inside the time loop, tagged with its level."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels t_n = n * dt with dt = T / n_steps."""

    n_steps: int
    t_end: float = 1.0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("need at least one time step")
        if self.t_end <= 0.0:
            raise ValueError("final time must be positive")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def level(self, n: int) -> float:
        return n * self.dt


@dataclass
class LevelSolution:
    """u^n frozen at the quadrature points plus the trained snapshot
    (None at level 0 and for oracle level solvers)."""

    level: int
    t: float
    values: np.ndarray
    params: MlpParams | None = None


@dataclass
class ParabolicResult:
    levels: list
    level_stats: list  # dicts: n, t, loss, max_err, l2_err, stop_reason
    loss_traces: list  # per-level training traces
    quad_points: np.ndarray = None

    @property
    def final_params(self) -> MlpParams | None:
        return self.levels[-1].params

    @property
    def final_values(self) -> np.ndarray:
        return self.levels[-1].values


def init_level0(spec: ProblemSpec, quad: QuadRule) -> LevelSolution:
    """u^0 sampled from the initial condition; no training at level 0."""
    return LevelSolution(level=0, t=0.0, values=initial_values(spec, quad.points))


def step_residual(
    tape: Tape,
    trial_jet: Jet2,
    prev_values: np.ndarray,
    spec: ProblemSpec,
    t_n: float,
    dt: float,
    x_q: np.ndarray,
) -> int:
    """Backward-Euler residual at the quadrature points:
    (T - u_prev)/dt - eps T'' + (mu) b T' + c T - r(x, t_n)."""
    return strong_residual_node(
        tape, trial_jet, spec, x_q, t=t_n, prev_values=prev_values, dt=dt
    )


def _level_errors(spec, params, values, quad, t_n):
    xs = np.linspace(0.0, 1.0, 1001)
    if params is not None:
        approx = trial_values(params, xs)
    else:
        approx = np.interp(xs, quad.points, values)
    diff = np.abs(approx - exact(spec, xs, t_n))
    w = np.full(xs.size, xs[1] - xs[0])
    w[0] = w[-1] = 0.5 * (xs[1] - xs[0])
    return float(diff.max()), float(np.sqrt(np.dot(w, diff**2)))


def solve_parabolic(
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    grid: TimeGrid,
    schedule: TrainSchedule,
    widths: list[int] | None = None,
    warm_start: bool = True,
    residual_mode: str = "strong",
    loss_mode: str = "integral",
    level_solver=None,
) -> ParabolicResult:
    """March the weak backward-Euler scheme over all time levels.

    Each level trains a fresh loss against the frozen previous level;
    the network warm-starts from the previous level's parameters unless
    `warm_start` is False (then each level re-initializes from
    schedule.seed + n).  `level_solver(prev_values, t_n, dt)` replaces
    training entirely when given, for oracle experiments.
    """
    if not spec.is_parabolic:
        raise ValueError(f"{spec.key} is steady; use train() directly")
    widths = widths or DEFAULT_WIDTHS

    levels = [init_level0(spec, quad)]
    stats = []
    traces = []
    params = init_params(widths, schedule.seed)

    for n in range(1, grid.n_steps + 1):
        t_n = grid.level(n)
        prev = levels[-1].values

        if level_solver is not None:
            values = np.asarray(level_solver(prev, t_n, grid.dt), dtype=np.float64)
            if values.shape != quad.points.shape:
                raise ValueError("level solver returned values on the wrong grid")
            max_err, l2_err = _level_errors(spec, None, values, quad, t_n)
            levels.append(LevelSolution(n, t_n, values, None))
            stats.append(
                {"n": n, "t": t_n, "loss": np.nan, "max_err": max_err,
                 "l2_err": l2_err, "stop_reason": "oracle"}
            )
            traces.append(np.empty(0))
            continue

        if not warm_start:
            params = init_params(widths, schedule.seed + n)
        result = train(
            params, spec, basis, quad, schedule, residual_mode, loss_mode,
            t=t_n, prev_values=prev, dt=grid.dt,
        )
        if result.stop_reason == "nan-loss":
            raise TimeSteppingError(f"non-finite loss while training level {n}")
        params = result.params
        values = trial_values(params, quad.points)
        max_err, l2_err = _level_errors(spec, params, values, quad, t_n)
        levels.append(LevelSolution(n, t_n, values, params))
        stats.append(
            {"n": n, "t": t_n, "loss": result.final_loss, "max_err": max_err,
             "l2_err": l2_err, "stop_reason": result.stop_reason}
        )
        traces.append(result.loss_trace)

    return ParabolicResult(
        levels=levels, level_stats=stats, loss_traces=traces, quad_points=quad.points
    )
