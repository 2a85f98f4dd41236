"""Optimizers and the two-phase training loop.

Training minimizes the weak-form loss with full-batch Adam first (all
quadrature points every step; there is no minibatching), then refines
with L-BFGS: two-loop recursion, strong-Wolfe line search, history
pairs kept only when the curvature condition holds.
"""

from dataclasses import dataclass, field

import numpy as np

from .network import MlpParams
from .problems import ProblemSpec
from .weakform import QuadRule, TestBasis, make_loss_closure

__all__ = [
    "AdamState",
    "LbfgsState",
    "TrainSchedule",
    "TrainResult",
    "adam_step",
    "lbfgs_step",
    "train",
]

_CURVATURE_FLOOR = 1e-10
_ARMIJO_SLACK = 1e-12


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter vector."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ValueError("gradient length does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient in Adam update")
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LbfgsState:
    """Two-loop recursion memory plus the cached (f, g) at the iterate."""

    m: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_trials: int = 25
    s_list: list = field(default_factory=list)
    y_list: list = field(default_factory=list)
    rho_list: list = field(default_factory=list)
    f: float | None = None
    g: np.ndarray | None = None
    iterations: int = 0

    def reset_history(self):
        self.s_list.clear()
        self.y_list.clear()
        self.rho_list.clear()

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        sy = float(np.dot(s, y))
        if sy <= _CURVATURE_FLOOR * float(np.linalg.norm(s) * np.linalg.norm(y)):
            return False
        if len(self.s_list) == self.m:
            self.s_list.pop(0)
            self.y_list.pop(0)
            self.rho_list.pop(0)
        self.s_list.append(s)
        self.y_list.append(y)
        self.rho_list.append(1.0 / sy)
        return True

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """-H g by the two-loop recursion; plain -g with empty history."""
        q = grad.copy()
        alphas = []
        for s, y, rho in zip(reversed(self.s_list), reversed(self.y_list), reversed(self.rho_list)):
            a = rho * float(np.dot(s, q))
            alphas.append(a)
            q -= a * y
        if self.s_list:
            s, y = self.s_list[-1], self.y_list[-1]
            q *= float(np.dot(s, y)) / float(np.dot(y, y))
        for (s, y, rho), a in zip(
            zip(self.s_list, self.y_list, self.rho_list), reversed(alphas)
        ):
            b = rho * float(np.dot(y, q))
            q += (a - b) * s
        return -q


def _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    # minimizer of the cubic through (a_lo, f_lo, d_lo), (a_hi, f_hi, d_hi);
    # None when degenerate, caller bisects
    h = a_hi - a_lo
    if h == 0.0:
        return None
    d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - d_lo * d_hi
    if disc < 0.0:
        return None
    d2 = np.sign(h) * np.sqrt(disc)
    denom = d_hi - d_lo + 2.0 * d2
    if denom == 0.0:
        return None
    cand = a_hi - h * (d_hi + d2 - d1) / denom
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    span = hi - lo
    if not np.isfinite(cand) or cand < lo + 0.1 * span or cand > hi - 0.1 * span:
        return None
    return float(cand)


def _strong_wolfe(closure, x, d, f0, g0, c1, c2, max_trials, alpha_init):
    """Line search returning (alpha, f, g, ok); `ok` is False when the
    evaluation budget runs out without satisfying both Wolfe conditions."""
    dphi0 = float(np.dot(g0, d))
    if dphi0 >= 0.0:
        return 0.0, f0, g0, False
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = closure(x + a * d)
        if not np.isfinite(f):
            f = np.inf
        return f, g, float(np.dot(g, d))

    def zoom(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi, g_lo):
        # invariant: a_lo satisfies Armijo and has the lower f; the
        # bracketed interval contains a strong-Wolfe point
        while evals < max_trials:
            a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            if a is None:
                a = 0.5 * (a_lo + a_hi)
            f_a, g_a, dphi_a = phi(a)
            if f_a > f0 + c1 * a * dphi0 or f_a >= f_lo:
                a_hi, f_hi, d_hi = a, f_a, dphi_a
            else:
                if abs(dphi_a) <= -c2 * dphi0:
                    return a, f_a, g_a, True
                if dphi_a * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo, g_lo = a, f_a, dphi_a, g_a
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                break
        # bracket collapsed or budget out: accept a_lo if it at least
        # made Armijo progress
        if a_lo > 0.0 and f_lo <= f0 + c1 * a_lo * dphi0:
            return a_lo, f_lo, g_lo, True
        return 0.0, f0, g0, False

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, dphi0, g0
    a = alpha_init
    alpha_max = 1e6
    first = True
    while evals < max_trials:
        f_a, g_a, dphi_a = phi(a)
        if f_a > f0 + c1 * a * dphi0 or (not first and f_a >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f_a, dphi_a, g_prev)
        if abs(dphi_a) <= -c2 * dphi0:
            return a, f_a, g_a, True
        if dphi_a >= 0.0:
            return zoom(a, f_a, dphi_a, a_prev, f_prev, d_prev, g_a)
        a_prev, f_prev, d_prev, g_prev = a, f_a, dphi_a, g_a
        a = min(2.0 * a, alpha_max)
        first = False
        if a_prev >= alpha_max:
            break
    return 0.0, f0, g0, False


def lbfgs_step(state: LbfgsState, params: np.ndarray, closure):
    """One L-BFGS iteration.

    `closure` maps a parameter vector to (loss, gradient) on a fresh
    tape.  Returns (new_params, accepted); on a line-search failure the
    incoming iterate is handed back with accepted=False and the caller
    should stop, keeping the last good parameters.
    """
    if state.g is None:
        state.f, state.g = closure(params)
    f0, g0 = state.f, state.g

    d = state.direction(state.g)
    descent = float(np.dot(d, g0))
    if descent >= 0.0 or not np.all(np.isfinite(d)):
        # stale curvature: fall back to steepest descent
        state.reset_history()
        d = -g0

    if state.iterations == 0 or not state.s_list:
        g_scale = float(np.abs(g0).sum())
        alpha_init = min(1.0, 1.0 / g_scale) if g_scale > 0.0 else 1.0
    else:
        alpha_init = 1.0

    alpha, f_new, g_new, ok = _strong_wolfe(
        closure, params, d, f0, g0, state.c1, state.c2, state.max_trials, alpha_init
    )
    if not ok:
        # backtracking on the raw gradient as a last resort
        d = -g0
        alpha = min(1.0, 1.0 / max(float(np.abs(g0).sum()), 1.0))
        for _ in range(20):
            cand = params + alpha * d
            f_c, g_c = closure(cand)
            if np.isfinite(f_c) and f_c <= f0 + state.c1 * alpha * float(np.dot(g0, d)):
                f_new, g_new, ok = f_c, g_c, True
                break
            alpha *= 0.5
        if not ok:
            return params, False

    armijo_bound = f0 + state.c1 * alpha * float(np.dot(g0, d))
    if f_new > armijo_bound + _ARMIJO_SLACK * max(1.0, abs(f0)):
        raise AssertionError("accepted step violates the Armijo condition")

    new_params = params + alpha * d
    state.push(alpha * d, g_new - g0)
    state.f, state.g = f_new, g_new
    state.iterations += 1
    return new_params, True


@dataclass
class TrainSchedule:
    """Two-phase epoch budget; an epoch is one full-batch step."""

    adam_epochs: int = 2000
    lbfgs_epochs: int = 1500
    seed: int = 0
    adam_lr: float = 1e-3
    loss_tol: float | None = None  # early stop for warm-started levels

    def __post_init__(self):
        if self.adam_epochs < 0 or self.lbfgs_epochs < 0:
            raise ValueError("epoch counts must be non-negative")


@dataclass
class TrainResult:
    params: MlpParams
    loss_trace: np.ndarray
    stop_reason: str  # completed | converged | nan-loss | line-search-failure
    final_loss: float


def train(
    params: MlpParams,
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    schedule: TrainSchedule,
    residual_mode: str = "strong",
    loss_mode: str = "integral",
    t: float | None = None,
    prev_values: np.ndarray | None = None,
    dt: float | None = None,
) -> TrainResult:
    """Adam then L-BFGS on the weak-form loss; never returns an iterate
    worse than the best one seen."""
    closure = make_loss_closure(
        params, spec, basis, quad, residual_mode, loss_mode, t, prev_values, dt
    )
    theta = params.flatten()
    trace: list[float] = []
    best_f = np.inf
    best_theta = theta.copy()
    reason = "completed"

    def consider(f, th):
        nonlocal best_f, best_theta
        if f < best_f:
            best_f = f
            best_theta = th.copy()

    adam = AdamState(lr=schedule.adam_lr)
    stopped = False
    for _ in range(schedule.adam_epochs):
        f, g = closure(theta)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            reason, stopped = "nan-loss", True
            break
        trace.append(f)
        consider(f, theta)
        theta = adam_step(adam, theta, g)
        if schedule.loss_tol is not None and f < schedule.loss_tol:
            reason, stopped = "converged", True
            break

    if not stopped:
        state = LbfgsState()
        for _ in range(schedule.lbfgs_epochs):
            theta_new, accepted = lbfgs_step(state, theta, closure)
            if not accepted:
                reason = "line-search-failure"
                break
            theta = theta_new
            f = state.f
            if not np.isfinite(f):
                reason = "nan-loss"
                break
            trace.append(f)
            consider(f, theta)
            if schedule.loss_tol is not None and f < schedule.loss_tol:
                reason = "converged"
                break

    if not trace:
        # zero-epoch schedule: report the untouched initial iterate
        f0, _ = closure(theta)
        consider(f0, theta)

    return TrainResult(
        params=params.with_flat(best_theta),
        loss_trace=np.asarray(trace, dtype=np.float64),
        stop_reason=reason,
        final_loss=best_f,
    )
