"""Weak-form (Petrov-Galerkin) neural solver for singularly perturbed
boundary-value and parabolic problems: neural network trial space, hat
test functions, quadrature loss, Adam + L-BFGS training and a
backward-Euler time stepper."""

from .autodiff import Jet2, Tape, backward, jet_primitive, leaf, primitive, seed_jet
from .config import RunConfig
from .estimator import ParabolicVPINNSolver, VPINNSolver
from .network import MlpParams, init_params, load_params, save_params, trial_values
from .optim import TrainSchedule, TrainResult, adam_step, lbfgs_step, train
from .problems import (
    ProblemSpec,
    RegimeReport,
    classify_regime,
    exact,
    initial_values,
    make_problem,
    source,
)
from .report import ErrorReport, compute_errors, emit_figure_data, emit_table
from .timestepper import LevelSolution, ParabolicResult, TimeGrid, solve_parabolic
from .weakform import (
    QuadRule,
    TestBasis,
    assemble_loss,
    assemble_weak_residuals,
    build_basis,
    build_quadrature,
    vpinn_loss,
)

__version__ = "0.1.0"

__all__ = [
    "Jet2",
    "Tape",
    "backward",
    "jet_primitive",
    "leaf",
    "primitive",
    "seed_jet",
    "RunConfig",
    "VPINNSolver",
    "ParabolicVPINNSolver",
    "MlpParams",
    "init_params",
    "save_params",
    "load_params",
    "trial_values",
    "TrainSchedule",
    "TrainResult",
    "adam_step",
    "lbfgs_step",
    "train",
    "ProblemSpec",
    "RegimeReport",
    "classify_regime",
    "exact",
    "initial_values",
    "make_problem",
    "source",
    "ErrorReport",
    "compute_errors",
    "emit_figure_data",
    "emit_table",
    "LevelSolution",
    "ParabolicResult",
    "TimeGrid",
    "solve_parabolic",
    "QuadRule",
    "TestBasis",
    "assemble_loss",
    "assemble_weak_residuals",
    "build_basis",
    "build_quadrature",
    "vpinn_loss",
    "__version__",
]
