"""Hat-function test space, quadrature, weak residuals and the loss.

The weak residual of test function i is the quadrature sum
R_i = sum_q w_q [operator(T)(x_q) - r(x_q)] v_i(x_q); the default
"strong" mode keeps the second derivative inside the integral, the
"ibp" mode moves the diffusion term onto the hat derivatives
(boundary terms vanish because hats are zero at both ends).
The training loss is (1/M) sum_i R_i^2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Jet2, Tape, backward, seed_jet
from .network import MlpParams, register_params, trial
from .problems import ProblemSpec, source

__all__ = [
    "TestBasis",
    "QuadRule",
    "build_basis",
    "build_quadrature",
    "strong_residual_node",
    "assemble_weak_residuals",
    "vpinn_loss",
    "assemble_loss",
    "exact_trial",
    "make_loss_closure",
]

RESIDUAL_MODES = ("strong", "ibp")
LOSS_MODES = ("integral", "mse")


@dataclass(frozen=True)
class TestBasis:
    """M interior hats on the uniform mesh x_k = k/(M+1), k = 0..M+1."""

    m: int
    mesh: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Table v_i(x_q), shape (m, len(x))."""
        x = np.asarray(x, dtype=np.float64)
        nodes = self.mesh[1:-1, None]
        return np.maximum(0.0, 1.0 - np.abs(x[None, :] - nodes) / self.h)

    def evaluate_derivative(self, x: np.ndarray) -> np.ndarray:
        """Table v_i'(x_q); one-sided slopes are averaged at the kinks.

        Kink detection carries a small tolerance: quadrature points can
        land within an ulp of a mesh node (e.g. 36 hats against 1000
        trapezoid points share every mesh node), and an arbitrary
        one-sided slope there would poison the integrated-by-parts form.
        """
        x = np.asarray(x, dtype=np.float64)
        d = (x[None, :] - self.mesh[1:-1, None]) / self.h
        absd = np.abs(d)
        tol = 1e-9
        sgn = np.where(absd <= tol, 0.0, np.sign(d))
        inner = np.where(absd < 1.0 - tol, -sgn / self.h, 0.0)
        # at x = 0 and x = 1 nothing lies outside the domain, so the
        # one-sided interior slope is the integrand value, not an average
        at_bound = (np.abs(x) <= 1e-12) | (np.abs(x - 1.0) <= 1e-12)
        factor = np.where(at_bound[None, :], 1.0, 0.5)
        edge = np.where(np.abs(absd - 1.0) <= tol, -np.sign(d) * factor / self.h, 0.0)
        return inner + edge


@dataclass(frozen=True)
class QuadRule:
    """Fixed quadrature points and positive weights on [0, 1]."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size


def build_basis(m: int) -> TestBasis:
    if m < 1:
        raise ValueError("need at least one test function")
    return TestBasis(m=int(m), mesh=np.linspace(0.0, 1.0, m + 2))


def build_quadrature(n: int) -> QuadRule:
    """Composite trapezoid on n uniform points over [0, 1]."""
    if n < 2:
        raise ValueError("trapezoid rule needs at least two points")
    h = 1.0 / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return QuadRule(points=np.linspace(0.0, 1.0, n), weights=w)


def exact_trial(spec: ProblemSpec, t: float | None = None):
    """Oracle trial: the closed-form solution itself as a jet closure.
    Substituting it must annihilate the weak residual."""
    if spec.is_parabolic:
        if t is None:
            raise ValueError("parabolic oracle trial needs a time level")
        decay = math.exp(-float(t))
        return lambda xj: spec.profile(xj) * decay
    return lambda xj: spec.profile(xj)


def _base_residual(
    tape: Tape,
    T: Jet2,
    spec: ProblemSpec,
    xq: np.ndarray,
    t: float | None,
    prev_values: np.ndarray | None,
    dt: float | None,
) -> int:
    """Every operator term except diffusion, minus the source; for a
    backward-Euler level this includes (T - u_prev)/dt."""
    node = tape.mul(tape.leaf(np.asarray(spec.c(xq), dtype=np.float64)), T.c0)
    if spec.convection_scale != 0.0:
        conv = spec.convection_scale * np.asarray(spec.b(xq), dtype=np.float64)
        node = tape.add(node, tape.mul(tape.leaf(conv), T.c1))
    if prev_values is not None:
        if dt is None:
            raise ValueError("previous level supplied without a time step")
        if prev_values.shape != xq.shape:
            raise ValueError("previous level values live on a different grid")
        diff = tape.sub(T.c0, tape.leaf(prev_values))
        node = tape.add(node, tape.mul(tape.const(1.0 / dt), diff))
    node = tape.sub(node, tape.leaf(np.asarray(source(spec, xq, t), dtype=np.float64)))
    return node


def strong_residual_node(
    tape: Tape,
    T: Jet2,
    spec: ProblemSpec,
    xq: np.ndarray,
    t: float | None = None,
    prev_values: np.ndarray | None = None,
    dt: float | None = None,
) -> int:
    """Pointwise operator residual at the quadrature points as one array
    node: operator(T) - r, including the backward-Euler quotient when a
    previous level is given."""
    base = _base_residual(tape, T, spec, xq, t, prev_values, dt)
    return tape.add(base, tape.mul(tape.const(-spec.diffusion), T.c2))


def assemble_weak_residuals(
    tape: Tape,
    trial_fn,
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    mode: str = "strong",
    t: float | None = None,
    prev_values: np.ndarray | None = None,
    dt: float | None = None,
) -> list[int]:
    """One tape node R_i per test function.

    `trial_fn` maps the seeded quadrature jet to the trial jet (a
    network trial or an oracle built from the closed form).  For a
    backward-Euler level pass t, prev_values (frozen on the quadrature
    grid) and dt.
    """
    if mode not in RESIDUAL_MODES:
        raise ValueError(f"residual mode must be one of {RESIDUAL_MODES}")
    xq = quad.points
    xj = seed_jet(tape, xq)
    T = trial_fn(xj)
    vw = basis.evaluate(xq) * quad.weights

    if mode == "strong":
        res = strong_residual_node(tape, T, spec, xq, t, prev_values, dt)
        return [tape.weighted_sum(res, vw[i]) for i in range(basis.m)]
    base = _base_residual(tape, T, spec, xq, t, prev_values, dt)

    dvw = basis.evaluate_derivative(xq) * (quad.weights * spec.diffusion)
    return [
        tape.add(tape.weighted_sum(T.c1, dvw[i]), tape.weighted_sum(base, vw[i]))
        for i in range(basis.m)
    ]


def vpinn_loss(tape: Tape, residuals: list[int]) -> int:
    """(1/M) sum_i R_i^2 as a differentiable scalar node."""
    acc = None
    for r in residuals:
        sq = tape.mul(r, r)
        acc = sq if acc is None else tape.add(acc, sq)
    if acc is None:
        raise ValueError("no residuals to reduce")
    return tape.mul(acc, tape.const(1.0 / len(residuals)))


def _mse_loss(
    tape: Tape,
    trial_fn,
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    t: float | None,
    prev_values: np.ndarray | None,
    dt: float | None,
) -> int:
    # (1/M) sum_i mean_q [R(x_q) v_i(x_q)]^2: pointwise residual, so
    # only the strong form applies
    xq = quad.points
    xj = seed_jet(tape, xq)
    T = trial_fn(xj)
    res = strong_residual_node(tape, T, spec, xq, t, prev_values, dt)
    vtab = basis.evaluate(xq)
    mean_w = np.full(quad.n, 1.0 / quad.n)
    acc = None
    for i in range(basis.m):
        qi = tape.mul(res, tape.leaf(vtab[i]))
        mi = tape.weighted_sum(tape.mul(qi, qi), mean_w)
        acc = mi if acc is None else tape.add(acc, mi)
    return tape.mul(acc, tape.const(1.0 / basis.m))


def assemble_loss(
    tape: Tape,
    trial_fn,
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    residual_mode: str = "strong",
    loss_mode: str = "integral",
    t: float | None = None,
    prev_values: np.ndarray | None = None,
    dt: float | None = None,
) -> int:
    """Full training loss as one tape node."""
    if loss_mode not in LOSS_MODES:
        raise ValueError(f"loss mode must be one of {LOSS_MODES}")
    if loss_mode == "mse":
        if residual_mode != "strong":
            raise ValueError("the mse loss is pointwise; it needs the strong residual")
        return _mse_loss(tape, trial_fn, spec, basis, quad, t, prev_values, dt)
    residuals = assemble_weak_residuals(
        tape, trial_fn, spec, basis, quad, residual_mode, t, prev_values, dt
    )
    return vpinn_loss(tape, residuals)


def make_loss_closure(
    template: MlpParams,
    spec: ProblemSpec,
    basis: TestBasis,
    quad: QuadRule,
    residual_mode: str = "strong",
    loss_mode: str = "integral",
    t: float | None = None,
    prev_values: np.ndarray | None = None,
    dt: float | None = None,
):
    """theta -> (loss, gradient) for the optimizers.

    A fresh tape is built on every call: the graph structure repeats
    each step, only leaf values change.
    """

    def loss_and_grad(theta: np.ndarray):
        tape = Tape()
        layers, flat = register_params(tape, template.with_flat(theta))
        loss = assemble_loss(
            tape,
            lambda xj: trial(tape, layers, xj),
            spec,
            basis,
            quad,
            residual_mode,
            loss_mode,
            t,
            prev_values,
            dt,
        )
        return float(tape.value(loss)), backward(tape, loss, flat)

    return loss_and_grad
