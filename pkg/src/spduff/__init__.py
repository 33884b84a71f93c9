"""Fast oscillations of ``eps**2 (a(t)**2 y')' + f(y) = m(t)`` near an S-shaped critical manifold.

The package builds the critical manifold and its folds, the frozen-time
energy landscape, integrates the fast-time system, computes the polar-phase
rate constants and certifies oscillation spacing and amplitude envelopes over
epsilon sweeps.
"""
from .analysis import ChartOscillationReport, SweepResult, envelope_convergence, oscillation_report, run_sweep
from .energy import (
    PotentialContext,
    action_frequency,
    base_level,
    check_A4,
    chi,
    make_context,
    potential,
    turning_points,
)
from .errors import SpduffError
from .functions import FunctionSpec
from .manifold import (
    ChartPartition,
    CriticalManifold,
    analysis_manifold,
    build_charts,
    build_manifold,
    check_A1_A3,
    find_folds,
)
from .polar import ChartConstants, compute_constants, gamma_rate, to_polar
from .problem import OscillatorProblem, builtin, load_problem, validate
from .simulate import SolverOptions, Trajectory, detect_crossings, energy_along, integrate

__version__ = "0.1.0"

__all__ = [
    "ChartConstants",
    "ChartOscillationReport",
    "ChartPartition",
    "CriticalManifold",
    "FunctionSpec",
    "OscillatorProblem",
    "PotentialContext",
    "SolverOptions",
    "SpduffError",
    "SweepResult",
    "Trajectory",
    "action_frequency",
    "analysis_manifold",
    "base_level",
    "build_charts",
    "build_manifold",
    "builtin",
    "check_A1_A3",
    "check_A4",
    "chi",
    "compute_constants",
    "detect_crossings",
    "energy_along",
    "envelope_convergence",
    "find_folds",
    "gamma_rate",
    "integrate",
    "load_problem",
    "make_context",
    "oscillation_report",
    "potential",
    "run_sweep",
    "to_polar",
    "turning_points",
    "validate",
]
