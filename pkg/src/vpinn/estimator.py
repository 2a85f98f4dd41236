"""Scikit-learn style estimators wrapping the solver pipeline.

`VPINNSolver().fit()` trains the network for a steady benchmark and
`predict(X)` evaluates the trained trial function; the parabolic
variant marches backward Euler over time levels and predicts at any
stored level.  Constructor arguments left at None resolve to the
benchmark protocol defaults at fit time.
"""

import time
from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator

from .config import (
    ADAM_EPOCH_DEFAULTS,
    DEFAULT_LOSS_MODE,
    DEFAULT_WIDTHS,
    PARABOLIC_DEFAULTS,
    PARABOLIC_LEVEL_TOL,
    STEADY_DEFAULTS,
)
from .network import init_params, trial_values
from .optim import TrainSchedule, train
from .problems import classify_regime, make_problem
from .report import compute_errors
from .timestepper import TimeGrid, solve_parabolic
from .validation import check_choice, check_points, check_positive_int
from .weakform import build_basis, build_quadrature

__all__ = ["VPINNSolver", "ParabolicVPINNSolver"]


class _SolverCore(BaseEstimator):
    """Shared hyperparameter handling; subclasses own the fit loop."""

    _parabolic = False

    def _spec(self):
        return make_problem(self.problem, self.epsilon, self.mu)

    def _resolve(self, spec):
        table = PARABOLIC_DEFAULTS if self._parabolic else STEADY_DEFAULTS
        self.n_test_ = check_positive_int(
            self.n_test if self.n_test is not None else table["n_test"], "n_test"
        )
        self.n_quad_ = check_positive_int(
            self.n_quad if self.n_quad is not None else table["n_quad"], "n_quad", 2
        )
        self.lbfgs_epochs_ = check_positive_int(
            self.lbfgs_epochs if self.lbfgs_epochs is not None else table["lbfgs_epochs"],
            "lbfgs_epochs",
            0,
        )
        default_adam = ADAM_EPOCH_DEFAULTS.get(spec.key, 0)
        self.adam_epochs_ = check_positive_int(
            self.adam_epochs if self.adam_epochs is not None else default_adam,
            "adam_epochs",
            0,
        )
        self.widths_ = list(self.widths) if self.widths is not None else list(DEFAULT_WIDTHS)
        check_choice(self.residual_mode, "residual_mode", ("strong", "ibp"))
        check_choice(self.loss_mode, "loss_mode", ("integral", "mse"))

    def _check_fitted(self):
        if not hasattr(self, "spec_"):
            raise RuntimeError("this solver has not been fitted yet; call fit() first")


class VPINNSolver(_SolverCore):
    """Weak-form neural solver for the steady singularly perturbed
    benchmarks (cd1, rd1, tp1)."""

    def __init__(
        self,
        problem: str = "cd1",
        epsilon: float = 1e-1,
        mu: float | None = None,
        n_test: int | None = None,
        n_quad: int | None = None,
        widths: list[int] | None = None,
        adam_epochs: int | None = None,
        lbfgs_epochs: int | None = None,
        seed: int = 0,
        adam_lr: float = 1e-3,
        residual_mode: str = "strong",
        loss_mode: str = DEFAULT_LOSS_MODE,
    ):
        self.problem = problem
        self.epsilon = epsilon
        self.mu = mu
        self.n_test = n_test
        self.n_quad = n_quad
        self.widths = widths
        self.adam_epochs = adam_epochs
        self.lbfgs_epochs = lbfgs_epochs
        self.seed = seed
        self.adam_lr = adam_lr
        self.residual_mode = residual_mode
        self.loss_mode = loss_mode

    def fit(self, X=None, y=None):
        """Train the network on the weak residual; X and y are ignored
        (the problem itself is the training signal)."""
        spec = self._spec()
        if spec.is_parabolic:
            raise ValueError("use ParabolicVPINNSolver for time-dependent problems")
        self._resolve(spec)

        started = time.perf_counter()
        basis = build_basis(self.n_test_)
        quad = build_quadrature(self.n_quad_)
        schedule = TrainSchedule(
            adam_epochs=self.adam_epochs_,
            lbfgs_epochs=self.lbfgs_epochs_,
            seed=self.seed,
            adam_lr=self.adam_lr,
        )
        result = train(
            init_params(self.widths_, self.seed),
            spec,
            basis,
            quad,
            schedule,
            self.residual_mode,
            self.loss_mode,
        )

        self.spec_ = spec
        self.params_ = result.params
        self.loss_trace_ = result.loss_trace
        self.stop_reason_ = result.stop_reason
        self.final_loss_ = result.final_loss
        self.wall_time_ = time.perf_counter() - started
        if spec.mu is not None:
            self.regime_ = classify_regime(spec.epsilon, spec.mu, spec.b, spec.c)
        self.report_ = compute_errors(
            self.params_,
            spec,
            final_loss=self.final_loss_,
            seed=self.seed,
            adam_epochs=self.adam_epochs_,
            lbfgs_epochs=self.lbfgs_epochs_,
            wall_time=self.wall_time_,
            stop_reason=self.stop_reason_,
        )
        return self

    def predict(self, X) -> np.ndarray:
        """Trial-function values at points X in [0, 1]."""
        self._check_fitted()
        return trial_values(self.params_, check_points(X))


class ParabolicVPINNSolver(_SolverCore):
    """Backward-Euler weak-form solver for the time-dependent
    benchmarks (parab1, parab2); one network per time level."""

    _parabolic = True

    def __init__(
        self,
        problem: str = "parab1",
        epsilon: float = 1e-1,
        mu: float | None = None,
        n_test: int | None = None,
        n_quad: int | None = None,
        widths: list[int] | None = None,
        adam_epochs: int | None = None,
        lbfgs_epochs: int | None = None,
        n_time_steps: int | None = None,
        final_time: float = 1.0,
        seed: int = 0,
        adam_lr: float = 1e-3,
        residual_mode: str = "strong",
        loss_mode: str = DEFAULT_LOSS_MODE,
        warm_start: bool = True,
        level_loss_tol: float = PARABOLIC_LEVEL_TOL,
    ):
        self.problem = problem
        self.epsilon = epsilon
        self.mu = mu
        self.n_test = n_test
        self.n_quad = n_quad
        self.widths = widths
        self.adam_epochs = adam_epochs
        self.lbfgs_epochs = lbfgs_epochs
        self.n_time_steps = n_time_steps
        self.final_time = final_time
        self.seed = seed
        self.adam_lr = adam_lr
        self.residual_mode = residual_mode
        self.loss_mode = loss_mode
        self.warm_start = warm_start
        self.level_loss_tol = level_loss_tol

    def fit(self, X=None, y=None):
        """March all time levels, training one network per level."""
        spec = self._spec()
        if not spec.is_parabolic:
            raise ValueError("use VPINNSolver for steady problems")
        self._resolve(spec)
        n_steps = check_positive_int(
            self.n_time_steps
            if self.n_time_steps is not None
            else PARABOLIC_DEFAULTS["n_time_steps"],
            "n_time_steps",
        )
        if self.final_time != spec.T:
            if self.final_time <= 0:
                raise ValueError("final time must be positive")
            spec = replace(spec, T=float(self.final_time))

        started = time.perf_counter()
        basis = build_basis(self.n_test_)
        quad = build_quadrature(self.n_quad_)
        grid = TimeGrid(n_steps=n_steps, t_end=float(self.final_time))
        schedule = TrainSchedule(
            adam_epochs=self.adam_epochs_,
            lbfgs_epochs=self.lbfgs_epochs_,
            seed=self.seed,
            adam_lr=self.adam_lr,
            loss_tol=self.level_loss_tol,
        )
        result = solve_parabolic(
            spec,
            basis,
            quad,
            grid,
            schedule,
            widths=self.widths_,
            warm_start=self.warm_start,
            residual_mode=self.residual_mode,
            loss_mode=self.loss_mode,
        )

        self.spec_ = spec
        self.grid_ = grid
        self.result_ = result
        self.params_ = result.final_params
        self.level_stats_ = result.level_stats
        self.loss_trace_ = result.loss_traces[-1] if result.loss_traces else np.empty(0)
        self.final_loss_ = result.level_stats[-1]["loss"] if result.level_stats else np.nan
        self.stop_reason_ = result.level_stats[-1]["stop_reason"] if result.level_stats else "completed"
        self.wall_time_ = time.perf_counter() - started
        if spec.mu is not None:
            self.regime_ = classify_regime(spec.epsilon, spec.mu, spec.b, spec.c)
        self.report_ = compute_errors(
            self.params_,
            spec,
            t=grid.t_end,
            final_loss=self.final_loss_,
            seed=self.seed,
            adam_epochs=self.adam_epochs_,
            lbfgs_epochs=self.lbfgs_epochs_,
            n_time_steps=n_steps,
            wall_time=self.wall_time_,
            stop_reason=self.stop_reason_,
        )
        return self

    def predict(self, X, t: float | None = None) -> np.ndarray:
        """Values at points X for the stored time level nearest to t
        (default: the final time)."""
        self._check_fitted()
        xs = check_points(X)
        if t is None:
            t = self.grid_.t_end
        if not 0.0 <= t <= self.grid_.t_end + 1e-12:
            raise ValueError(f"t={t} outside [0, {self.grid_.t_end}]")
        n = int(round(t / self.grid_.dt))
        if abs(n * self.grid_.dt - t) > 1e-9:
            raise ValueError(
                f"t={t} is not a stored time level (dt={self.grid_.dt}); "
                "refit with a matching grid or query a level time"
            )
        level = self.result_.levels[n]
        if level.params is None:
            return np.interp(xs, self.result_.quad_points, level.values)
        return trial_values(level.params, xs)
