import math

import numpy as np
import pytest

from vpinn.network import init_params
from vpinn.optim import (
    AdamState,
    LbfgsState,
    TrainSchedule,
    adam_step,
    lbfgs_step,
    train,
)
from vpinn.problems import make_problem
from vpinn.weakform import build_basis, build_quadrature


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        state = AdamState()
        params = np.array([1.0, -2.0, 0.5])
        out = adam_step(state, params, np.zeros(3))
        np.testing.assert_array_equal(out, params)

    def test_constant_gradient_step_approaches_lr(self):
        # bias correction makes the normalized step lr * sign(g) at once
        state = AdamState(lr=1e-3)
        params = np.array([0.0])
        g = np.array([7.3])
        for _ in range(50):
            new = adam_step(state, params, g)
            assert abs(abs(new[0] - params[0]) - 1e-3) < 1e-5
            params = new

    def test_quadratic_converges_and_matches_reference_rule(self):
        # independent transcription of the update rule, run side by side
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        theta_ref = 1.0
        m = v = 0.0

        state = AdamState(lr=lr)
        theta = np.array([1.0])
        for t in range(1, 5001):
            g = 2.0 * theta_ref
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            theta_ref = theta_ref - lr * m_hat / (math.sqrt(v_hat) + eps)

            theta = adam_step(state, theta, 2.0 * theta)
            assert abs(theta[0] - theta_ref) < 1e-12
        assert abs(theta[0]) < 1e-3

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(FloatingPointError):
            adam_step(AdamState(), np.zeros(2), np.array([1.0, np.nan]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_step(AdamState(), np.zeros(2), np.zeros(3))

    def test_moments_stay_finite(self):
        state = AdamState()
        params = np.zeros(4)
        rng = np.random.default_rng(0)
        for _ in range(200):
            params = adam_step(state, params, rng.normal(size=4) * 1e3)
        assert np.all(np.isfinite(state.m)) and np.all(np.isfinite(state.v))


def _quadratic_bowl():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(5, 5))
    a = m @ m.T + 5.0 * np.eye(5)

    def closure(x):
        return 0.5 * float(x @ a @ x), a @ x

    return closure


def _rosenbrock(x):
    f = (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2
    g = np.array(
        [
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
            200.0 * (x[1] - x[0] ** 2),
        ]
    )
    return f, g


class TestLbfgs:
    def test_first_direction_is_negative_gradient(self):
        state = LbfgsState()
        g = np.array([3.0, -4.0])
        np.testing.assert_array_equal(state.direction(g), -g)

    def test_quadratic_bowl_converges_fast(self):
        closure = _quadratic_bowl()
        x = np.ones(5)
        state = LbfgsState()
        for _ in range(30):
            x, ok = lbfgs_step(state, x, closure)
            assert ok
            if np.linalg.norm(x) < 1e-8:
                break
        assert np.linalg.norm(x) < 1e-8

    def test_rosenbrock_within_200_iterations(self):
        x = np.array([-1.2, 1.0])
        state = LbfgsState()
        for _ in range(200):
            x, ok = lbfgs_step(state, x, _rosenbrock)
            if not ok:
                break
            if state.f < 1e-8:
                break
        assert state.f < 1e-8

    def test_accepted_steps_never_increase_loss_on_bowl(self):
        closure = _quadratic_bowl()
        x = np.full(5, 2.0)
        state = LbfgsState()
        last = closure(x)[0]
        for _ in range(15):
            x, ok = lbfgs_step(state, x, closure)
            assert ok
            assert state.f <= last + 1e-12
            last = state.f

    def test_curvature_guard_rejects_flat_pairs(self):
        state = LbfgsState()
        s = np.array([1.0, 0.0])
        y = np.array([0.0, 1.0])  # s.y = 0: no curvature information
        assert not state.push(s, y)
        assert state.push(s, np.array([2.0, 1.0]))

    def test_history_is_bounded(self):
        state = LbfgsState(m=3)
        rng = np.random.default_rng(2)
        for _ in range(10):
            s = rng.normal(size=2)
            state.push(s, s * rng.uniform(0.5, 2.0))
        assert len(state.s_list) == 3


def _tiny_setup(adam_epochs, lbfgs_epochs, seed=0, loss_tol=None):
    spec = make_problem("cd1", 1e-1)
    basis = build_basis(4)
    quad = build_quadrature(40)
    params = init_params([1, 4, 1], seed=seed)
    schedule = TrainSchedule(
        adam_epochs=adam_epochs, lbfgs_epochs=lbfgs_epochs, seed=seed, loss_tol=loss_tol
    )
    return params, spec, basis, quad, schedule


class TestTrain:
    def test_zero_epochs_returns_initial_params(self):
        params, spec, basis, quad, schedule = _tiny_setup(0, 0)
        result = train(params, spec, basis, quad, schedule)
        assert result.params.flatten().tobytes() == params.flatten().tobytes()
        assert result.loss_trace.size == 0
        assert result.stop_reason == "completed"
        assert np.isfinite(result.final_loss)

    def test_trace_length_is_epoch_budget(self):
        params, spec, basis, quad, schedule = _tiny_setup(7, 5)
        result = train(params, spec, basis, quad, schedule)
        assert result.loss_trace.size == 12
        assert result.stop_reason == "completed"

    def test_same_seed_identical_traces(self):
        a = train(*_tiny_setup(10, 10))
        b = train(*_tiny_setup(10, 10))
        assert a.loss_trace.tobytes() == b.loss_trace.tobytes()
        assert a.params.flatten().tobytes() == b.params.flatten().tobytes()

    def test_training_reduces_loss(self):
        params, spec, basis, quad, schedule = _tiny_setup(50, 80)
        result = train(params, spec, basis, quad, schedule)
        assert result.loss_trace[-1] < result.loss_trace[0] * 1e-2
        assert result.final_loss <= result.loss_trace.min() + 1e-15

    def test_early_stop_records_converged(self):
        params, spec, basis, quad, schedule = _tiny_setup(0, 400, loss_tol=1e-6)
        result = train(params, spec, basis, quad, schedule)
        if result.stop_reason == "converged":
            assert result.loss_trace[-1] < 1e-6
            assert result.loss_trace.size < 400

    def test_best_seen_iterate_is_returned(self):
        params, spec, basis, quad, schedule = _tiny_setup(30, 30)
        result = train(params, spec, basis, quad, schedule)
        from vpinn.weakform import make_loss_closure

        closure = make_loss_closure(params, spec, basis, quad)
        f, _ = closure(result.params.flatten())
        assert f <= result.loss_trace.min() + 1e-15
