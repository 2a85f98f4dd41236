"""The five benchmark problems and the two-parameter regime classifier.

Each problem carries its closed-form solution as a closure over jet
arithmetic, so the source term is manufactured by pushing degree-2 jets
through the exact solution and applying the differential operator --
never by hand-transcribed derivatives.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Jet2, Tape, seed_jet

__all__ = [
    "CONVECTION_DIFFUSION",
    "REACTION_DIFFUSION",
    "TWO_PARAMETER",
    "PARABOLIC_ONE_PARAM",
    "PARABOLIC_TWO_PARAM",
    "PROBLEM_KEYS",
    "ProblemSpec",
    "RegimeReport",
    "make_problem",
    "exact",
    "source",
    "initial_values",
    "classify_regime",
    "REGIME_CONVECTION_DIFFUSION",
    "REGIME_DIFFUSION_CONVECTION_REACTION",
    "REGIME_REACTION_DIFFUSION",
]

CONVECTION_DIFFUSION = "convection-diffusion"
REACTION_DIFFUSION = "reaction-diffusion"
TWO_PARAMETER = "two-parameter"
PARABOLIC_ONE_PARAM = "parabolic-one-param"
PARABOLIC_TWO_PARAM = "parabolic-two-param"

# CLI keys in catalog order
PROBLEM_KEYS = {
    "cd1": CONVECTION_DIFFUSION,
    "parab1": PARABOLIC_ONE_PARAM,
    "rd1": REACTION_DIFFUSION,
    "tp1": TWO_PARAMETER,
    "parab2": PARABOLIC_TWO_PARAM,
}

_TWO_PARAM_KINDS = (TWO_PARAMETER, PARABOLIC_TWO_PARAM)
_PARABOLIC_KINDS = (PARABOLIC_ONE_PARAM, PARABOLIC_TWO_PARAM)


@dataclass(frozen=True)
class ProblemSpec:
    """One benchmark: coefficients, parameters and the exact solution.

    `profile` maps a spatial jet to the x-part of the solution; for
    parabolic problems the full solution is exp(-t) * profile(x), which
    makes the time derivative available analytically.
    """

    key: str
    kind: str
    epsilon: float
    mu: float | None
    b: Callable | None  # convection coefficient, plain arithmetic closure
    c: Callable  # reaction coefficient, plain arithmetic closure
    profile: Callable[[Jet2], Jet2]
    T: float = 1.0
    aux: dict = field(default_factory=dict, compare=False)

    @property
    def is_parabolic(self) -> bool:
        return self.kind in _PARABOLIC_KINDS

    @property
    def diffusion(self) -> float:
        """Coefficient of -u'' in the operator (epsilon^2 only for the
        reaction-diffusion equation)."""
        if self.kind == REACTION_DIFFUSION:
            return self.epsilon * self.epsilon
        return self.epsilon

    @property
    def convection_scale(self) -> float:
        """Multiplier of b(x) u' in the operator: 0 when there is no
        convection term, mu for two-parameter kinds, 1 otherwise."""
        if self.kind == REACTION_DIFFUSION:
            return 0.0
        if self.kind in _TWO_PARAM_KINDS:
            return self.mu
        return 1.0


@dataclass(frozen=True)
class RegimeReport:
    """Characteristic-root magnitudes and the matching classical regime."""

    lambda0: float
    lambda1: float
    regime: str


REGIME_CONVECTION_DIFFUSION = "convection-diffusion-like"
REGIME_DIFFUSION_CONVECTION_REACTION = "diffusion-convection-reaction-like"
REGIME_REACTION_DIFFUSION = "reaction-diffusion-like"


def _one(x):
    return x * 0.0 + 1.0


def make_problem(kind: str, epsilon: float, mu: float | None = None) -> ProblemSpec:
    """Build a fully populated benchmark spec.

    `kind` may be a catalog key (cd1, parab1, rd1, tp1, parab2) or a
    kind name.  mu is required for the two-parameter kinds.
    """
    kind = PROBLEM_KEYS.get(kind, kind)
    key = {v: k for k, v in PROBLEM_KEYS.items()}.get(kind)
    if key is None:
        raise ValueError(f"unknown problem kind: {kind!r}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if kind in _TWO_PARAM_KINDS:
        if mu is None:
            raise ValueError(f"{key} is a two-parameter problem and needs mu")
        if not 0.0 < mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")
    else:
        if mu is not None:
            raise ValueError(f"{key} is a one-parameter problem; mu does not apply")

    eps = float(epsilon)

    if kind == CONVECTION_DIFFUSION:
        # u = 1 - x - e^{-x/eps} + x e^{-x/eps}; layer at x = 0 as printed
        # even though the general theory assumes b > 0
        def profile(x: Jet2) -> Jet2:
            layer = (-(x / eps)).exp()
            return 1.0 - x - layer + x * layer

        return ProblemSpec(key, kind, eps, None, lambda x: -(1.0 + x), _one, profile)

    if kind == REACTION_DIFFUSION:
        shift = math.exp(-1.0 / eps)

        def profile(x: Jet2) -> Jet2:
            left = (-(x / eps)).exp()
            right = (-((1.0 - x) / eps)).exp()
            return (1.0 + shift) - left - right

        return ProblemSpec(key, kind, eps, None, None, _one, profile)

    if kind == PARABOLIC_ONE_PARAM:
        def profile(x: Jet2) -> Jet2:
            layer = (-((1.0 - x) / eps)).exp()
            return (1.0 - layer) * x.sin()

        return ProblemSpec(key, kind, eps, None, _one, _one, profile)

    if kind == TWO_PARAMETER:
        m = float(mu)
        s = math.sqrt(m * m + 4.0 * eps)
        m1 = (m - s) / (2.0 * eps)  # negative root
        m2 = (m + s) / (2.0 * eps)  # positive root
        d = 1.0 - math.exp(-s / eps)
        e_const = eps - m - 1.0
        # e^{m1} (e^{1-m1} - 1) == e - e^{m1}: same closed form, no
        # overflow for any epsilon
        coef_left = math.e - math.exp(m1)
        coef_right = math.exp(1.0 - m2) - 1.0

        def profile(x: Jet2) -> Jet2:
            term = (coef_left * (-(x * m2)).exp() - coef_right * ((1.0 - x) * m1).exp()) / d
            return (term - (1.0 - x).exp()) / e_const

        aux = {"m1": m1, "m2": m2, "D": d, "E": e_const}
        return ProblemSpec(key, kind, eps, m, _one, _one, profile, aux=aux)

    # parabolic two-parameter
    m = float(mu)
    s = math.sqrt(m * m + 4.0 * eps)
    u_l = (-m + s) / (2.0 * eps)
    u_r = (m + s) / (2.0 * eps)
    pi2 = math.pi * math.pi
    denom = m * m * pi2 + (eps * pi2 + 1.0) ** 2
    a = (eps * pi2 + 1.0) / denom
    b_coef = m * math.pi / denom
    bc_denom = 1.0 - math.exp(-(u_l + u_r))
    big_a = -a * (1.0 + math.exp(-u_r)) / bc_denom
    big_b = a * (1.0 + math.exp(-u_l)) / bc_denom

    def profile(x: Jet2) -> Jet2:
        osc = a * (x * math.pi).cos() + b_coef * (x * math.pi).sin()
        left = big_a * (-(x * u_l)).exp()
        right = big_b * (-((1.0 - x) * u_r)).exp()
        return osc + left + right

    aux = {"a": a, "b": b_coef, "u_l": u_l, "u_r": u_r, "A": big_a, "B": big_b}
    return ProblemSpec(key, kind, eps, m, _one, _one, profile, aux=aux)


def _check_t(spec: ProblemSpec, t):
    if spec.is_parabolic:
        if t is None:
            raise ValueError(f"{spec.key} is time dependent; t is required")
        if not -1e-12 <= t <= spec.T + 1e-12:
            raise ValueError(f"t={t} outside [0, {spec.T}]")
        return float(t)
    if t is not None:
        raise ValueError(f"{spec.key} is steady; t does not apply")
    return None


def exact(spec: ProblemSpec, x, t: float | None = None):
    """Closed-form solution value(s) at x (and time t when parabolic)."""
    t = _check_t(spec, t)
    tape = Tape()
    u = spec.profile(seed_jet(tape, np.asarray(x, dtype=np.float64) if np.ndim(x) else float(x)))
    vals = np.broadcast_to(tape.vals[u.c0], np.shape(x)).copy() if np.ndim(x) else tape.vals[u.c0]
    if spec.is_parabolic:
        vals = math.exp(-t) * vals
    return vals


def initial_values(spec: ProblemSpec, x):
    """phi(x) = exact solution at t = 0 (parabolic problems only)."""
    if not spec.is_parabolic:
        raise ValueError(f"{spec.key} is steady; it has no initial condition")
    return exact(spec, x, 0.0)


def source(spec: ProblemSpec, x, t: float | None = None):
    """Manufactured source: the problem's differential operator applied
    to the exact solution, with spatial derivatives from jets and the
    time derivative taken analytically through the exp(-t) factor."""
    t = _check_t(spec, t)
    tape = Tape()
    xv = np.asarray(x, dtype=np.float64) if np.ndim(x) else float(x)
    u = spec.profile(seed_jet(tape, xv))
    u0, u1, u2 = (tape.vals[r] for r in (u.c0, u.c1, u.c2))
    u0, u1, u2 = (np.broadcast_to(v, np.shape(xv)).copy() if np.ndim(xv) else v for v in (u0, u1, u2))

    r = -spec.diffusion * u2 + spec.c(xv) * u0
    if spec.convection_scale != 0.0:
        r = r + spec.convection_scale * spec.b(xv) * u1
    if spec.is_parabolic:
        r = math.exp(-t) * (r - u0)  # u_t = -exp(-t) * profile
    return r


def classify_regime(
    epsilon: float,
    mu: float,
    b: Callable | None = None,
    c: Callable | None = None,
    ratio_threshold: float = 100.0,
) -> RegimeReport:
    """Characteristic-root magnitudes of -eps z^2 + mu b z + c = 0 over a
    1001-point grid, and the classical regime the pair (eps, mu) lands in.

    A ratio of at least `ratio_threshold` between the parameters counts
    as 'much smaller'; mu = 1 is treated as plain convection-diffusion.
    """
    if epsilon <= 0.0 or mu <= 0.0:
        raise ValueError("epsilon and mu must be positive")
    xs = np.linspace(0.0, 1.0, 1001)
    bv = np.broadcast_to(b(xs) if b is not None else 1.0, xs.shape)
    cv = np.broadcast_to(c(xs) if c is not None else 1.0, xs.shape)
    disc = np.sqrt(mu * mu * bv * bv + 4.0 * epsilon * cv)
    lam0 = float(np.max((-mu * bv + disc) / (2.0 * epsilon)))
    lam1 = float(np.min((mu * bv + disc) / (2.0 * epsilon)))

    if mu == 1.0:
        regime = REGIME_CONVECTION_DIFFUSION
    elif mu * mu >= ratio_threshold * epsilon:
        regime = REGIME_DIFFUSION_CONVECTION_REACTION
    elif epsilon >= ratio_threshold * mu * mu:
        regime = REGIME_REACTION_DIFFUSION
    elif mu * mu >= epsilon:
        # between the clear-cut regimes: side with the larger ratio
        regime = REGIME_DIFFUSION_CONVECTION_REACTION
    else:
        regime = REGIME_REACTION_DIFFUSION
    return RegimeReport(lambda0=lam0, lambda1=lam1, regime=regime)
