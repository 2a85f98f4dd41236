import math

import mpmath
import numpy as np
import pytest

from vpinn.autodiff import Tape, seed_jet
from vpinn.network import init_params, register_params, trial, trial_values
from vpinn.optim import TrainSchedule
from vpinn.problems import (
    PARABOLIC_ONE_PARAM,
    ProblemSpec,
    exact,
    initial_values,
    make_problem,
    source,
)
from vpinn.timestepper import (
    LevelSolution,
    TimeGrid,
    init_level0,
    solve_parabolic,
    step_residual,
)
from vpinn.weakform import build_basis, build_quadrature

from oracles import backward_euler_fd


def _printed_parab2_initial(eps, mu, x):
    """Example-5 closed form at t=0, straight from the printed
    constants, in 50-digit arithmetic."""
    with mpmath.workdps(50):
        eps, mu, x = mpmath.mpf(eps), mpmath.mpf(mu), mpmath.mpf(x)
        pi = mpmath.pi
        denom = mu**2 * pi**2 + (eps * pi**2 + 1) ** 2
        a = (eps * pi**2 + 1) / denom
        b = mu * pi / denom
        s = mpmath.sqrt(mu**2 + 4 * eps)
        u_l = (-mu + s) / (2 * eps)
        u_r = (mu + s) / (2 * eps)
        big_a = -a * (1 + mpmath.exp(-u_r)) / (1 - mpmath.exp(-(u_l + u_r)))
        big_b = a * (1 + mpmath.exp(-u_l)) / (1 - mpmath.exp(-(u_l + u_r)))
        u = (
            a * mpmath.cos(pi * x)
            + b * mpmath.sin(pi * x)
            + big_a * mpmath.exp(-u_l * x)
            + big_b * mpmath.exp(-u_r * (1 - x))
        )
        return float(u)


class TestTimeGrid:
    def test_levels_and_dt(self):
        grid = TimeGrid(n_steps=100, t_end=1.0)
        assert grid.dt == 0.01
        assert grid.level(0) == 0.0
        assert math.isclose(grid.level(100), 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(n_steps=0)
        with pytest.raises(ValueError):
            TimeGrid(n_steps=5, t_end=0.0)


class TestInitLevel0:
    def test_example2_endpoints_vanish(self):
        spec = make_problem("parab1", 1e-1)
        quad = build_quadrature(11)
        lvl = init_level0(spec, quad)
        assert lvl.values[0] == 0.0
        assert lvl.values[-1] == 0.0
        assert lvl.level == 0 and lvl.t == 0.0 and lvl.params is None

    def test_example5_against_high_precision_oracle(self):
        spec = make_problem("parab2", 1e-1, 1e-2)
        quad = build_quadrature(3)  # points 0, 0.5, 1
        lvl = init_level0(spec, quad)
        ref = _printed_parab2_initial(1e-1, 1e-2, 0.5)
        assert abs(lvl.values[1] - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_steady_problem_rejected(self):
        with pytest.raises(ValueError):
            init_level0(make_problem("cd1", 1e-1), build_quadrature(5))


def _exact_trial_jet(spec, tape, xq, t):
    decay = math.exp(-t)
    return spec.profile(seed_jet(tape, xq)) * decay


class TestStepResidual:
    def test_backward_euler_truncation_factor(self):
        # with the exact solution at both levels the residual is exactly
        # kappa * u(x, t_n) where kappa = 1 - (e^dt - 1)/dt = -dt/2 + ...
        spec = make_problem("parab1", 1e-1)
        xq = np.linspace(0.05, 0.95, 10)
        t_n, dt = 0.4, 1e-2
        prev = exact(spec, xq, t_n - dt)
        tape = Tape()
        res = step_residual(tape, _exact_trial_jet(spec, tape, xq, t_n), prev, spec, t_n, dt, xq)
        u_now = exact(spec, xq, t_n)
        kappa = 1.0 - (math.exp(dt) - 1.0) / dt
        np.testing.assert_allclose(tape.value(res), kappa * u_now, rtol=1e-9)
        assert np.max(np.abs(tape.value(res))) <= 0.6 * dt * np.max(np.abs(u_now))

    def test_difference_term_cancels_when_prev_is_trial(self):
        # r = 0, c = 0, b = 0 and prev == trial values: residual = -eps T''
        eps = 0.25
        zero = lambda x: x * 0.0
        spec = ProblemSpec(
            key="parab1", kind=PARABOLIC_ONE_PARAM, epsilon=eps, mu=None,
            b=zero, c=zero, profile=lambda x: x * 0.0,
        )
        xq = np.linspace(0.0, 1.0, 21)
        tape = Tape()
        trial_jet = seed_jet(tape, xq).sin()  # arbitrary smooth trial
        prev = np.sin(xq)
        res = step_residual(tape, trial_jet, prev, spec, 0.3, 0.05, xq)
        np.testing.assert_allclose(tape.value(res), eps * np.sin(xq), rtol=0, atol=1e-12)

    def test_zero_trial_zero_prev_gives_minus_source(self):
        spec = make_problem("parab1", 1e-1)
        xq = np.linspace(0.0, 1.0, 15)
        tape = Tape()
        zero_jet = seed_jet(tape, xq) * 0.0
        res = step_residual(tape, zero_jet, np.zeros(15), spec, 0.5, 0.01, xq)
        np.testing.assert_allclose(tape.value(res), -source(spec, xq, 0.5), rtol=1e-12)

    def test_grid_mismatch_rejected(self):
        spec = make_problem("parab1", 1e-1)
        xq = np.linspace(0.0, 1.0, 15)
        tape = Tape()
        with pytest.raises(ValueError):
            step_residual(tape, seed_jet(tape, xq), np.zeros(7), spec, 0.5, 0.01, xq)


class TestSolveParabolic:
    def test_zero_epochs_keeps_initial_network_trace(self):
        spec = make_problem("parab1", 1e-1)
        basis, quad = build_basis(4), build_quadrature(30)
        grid = TimeGrid(n_steps=3, t_end=1.0)
        schedule = TrainSchedule(adam_epochs=0, lbfgs_epochs=0, seed=5)
        result = solve_parabolic(spec, basis, quad, grid, schedule, widths=[1, 4, 1])
        init_trace = trial_values(init_params([1, 4, 1], 5), quad.points)
        for lvl in result.levels[1:]:
            np.testing.assert_array_equal(lvl.values, init_trace)
        assert len(result.level_stats) == 3
        assert all(np.isfinite(s["max_err"]) for s in result.level_stats)

    def test_one_step_matches_classical_backward_euler(self):
        # layer-free setting: train one level hard, compare against an
        # independent finite-difference backward-Euler solve
        spec = make_problem("parab1", 0.5)
        basis, quad = build_basis(12), build_quadrature(60)
        grid = TimeGrid(n_steps=1, t_end=0.1)
        schedule = TrainSchedule(
            adam_epochs=200, lbfgs_epochs=800, seed=0, loss_tol=1e-13
        )
        result = solve_parabolic(
            spec, basis, quad, grid, schedule, widths=[1, 10, 10, 1]
        )
        x_fd, u_fd = backward_euler_fd(
            b=spec.b,
            c=spec.c,
            eps=spec.epsilon,
            mu=spec.convection_scale,
            r_of_xt=lambda x, t: source(spec, x, t),
            u0=lambda x: initial_values(spec, x),
            t_end=0.1,
            n_steps=1,
        )
        vpinn_u1 = result.final_values
        oracle_u1 = np.interp(quad.points, x_fd, u_fd)
        assert np.max(np.abs(vpinn_u1 - oracle_u1)) < 1e-3

    def test_oracle_level_solver_bypasses_training(self):
        spec = make_problem("parab1", 0.5)
        basis, quad = build_basis(4), build_quadrature(25)
        grid = TimeGrid(n_steps=4, t_end=1.0)

        def fd_level(prev, t_n, dt):
            return np.asarray(exact(spec, quad.points, t_n))

        result = solve_parabolic(
            spec, basis, quad, grid, TrainSchedule(0, 0), level_solver=fd_level
        )
        assert all(lvl.params is None for lvl in result.levels)
        # values are exact on the quadrature grid; the reported error is
        # only limited by interpolating 25 points onto the 1001-point grid
        np.testing.assert_array_equal(
            result.final_values, exact(spec, quad.points, 1.0)
        )
        assert result.level_stats[-1]["max_err"] < 1e-3
        assert result.level_stats[0]["stop_reason"] == "oracle"

    def test_level_loss_never_worse_than_start(self):
        spec = make_problem("parab1", 1e-1)
        basis, quad = build_basis(6), build_quadrature(40)
        grid = TimeGrid(n_steps=2, t_end=1.0)
        schedule = TrainSchedule(adam_epochs=20, lbfgs_epochs=20, seed=1)
        result = solve_parabolic(spec, basis, quad, grid, schedule, widths=[1, 6, 1])
        for stats, trace in zip(result.level_stats, result.loss_traces):
            assert stats["loss"] <= trace[0] + 1e-15

    def test_warm_start_reuses_previous_level(self):
        spec = make_problem("parab1", 1e-1)
        basis, quad = build_basis(4), build_quadrature(30)
        grid = TimeGrid(n_steps=2, t_end=0.5)
        schedule = TrainSchedule(adam_epochs=5, lbfgs_epochs=5, seed=3)
        warm = solve_parabolic(spec, basis, quad, grid, schedule, widths=[1, 4, 1])
        cold = solve_parabolic(
            spec, basis, quad, grid, schedule, widths=[1, 4, 1], warm_start=False
        )
        assert (
            warm.levels[2].params.flatten().tobytes()
            != cold.levels[2].params.flatten().tobytes()
        )

    def test_deterministic_given_seed(self):
        spec = make_problem("parab1", 1e-1)
        basis, quad = build_basis(4), build_quadrature(30)
        grid = TimeGrid(n_steps=2, t_end=0.5)
        schedule = TrainSchedule(adam_epochs=5, lbfgs_epochs=5, seed=3)
        a = solve_parabolic(spec, basis, quad, grid, schedule, widths=[1, 4, 1])
        b = solve_parabolic(spec, basis, quad, grid, schedule, widths=[1, 4, 1])
        for la, lb in zip(a.levels, b.levels):
            np.testing.assert_array_equal(la.values, lb.values)

    def test_steady_spec_rejected(self):
        with pytest.raises(ValueError):
            solve_parabolic(
                make_problem("cd1", 1e-1),
                build_basis(4),
                build_quadrature(30),
                TimeGrid(n_steps=2),
                TrainSchedule(0, 0),
            )
