"""Mean-variance equilibrium dividend barriers for a Brownian surplus model."""

__version__ = "0.1.0"

from .barrier import (
    BarrierSolution,
    MultipleRoots,
    NoRoot,
    f,
    find_all_roots,
    solve_barrier,
    taksar_barrier,
)
from .model import (
    CharacteristicRoots,
    ModelParams,
    ParameterError,
    Regime,
    RegimeMismatch,
    RegimeTag,
    characteristic_roots,
    classify_regime,
)
from .simulate import (
    ExcessTruncation,
    PathResult,
    SimConfig,
    SimEstimate,
    estimate_moments,
    estimate_mv_frontier,
    simulate_path,
)
from .sweep import NotFound, SweepSpec, f_curve, gamma_bar, sweep_barrier, value_curve
from .tables import Table
from .value import (
    ClosedFormSolution,
    ConcavityResult,
    Equilibrium,
    PayAllSolution,
    Status,
    VerificationReport,
    build_solution,
    check_concavity,
    pay_all_solution,
    solve_equilibrium,
    verify_hjb,
)

__all__ = [
    "BarrierSolution",
    "CharacteristicRoots",
    "ClosedFormSolution",
    "ConcavityResult",
    "Equilibrium",
    "ExcessTruncation",
    "ModelParams",
    "MultipleRoots",
    "NoRoot",
    "NotFound",
    "ParameterError",
    "PathResult",
    "PayAllSolution",
    "Regime",
    "RegimeMismatch",
    "RegimeTag",
    "SimConfig",
    "SimEstimate",
    "Status",
    "SweepSpec",
    "Table",
    "VerificationReport",
    "build_solution",
    "characteristic_roots",
    "check_concavity",
    "classify_regime",
    "estimate_moments",
    "estimate_mv_frontier",
    "f",
    "f_curve",
    "find_all_roots",
    "gamma_bar",
    "pay_all_solution",
    "simulate_path",
    "solve_barrier",
    "solve_equilibrium",
    "sweep_barrier",
    "taksar_barrier",
    "value_curve",
    "verify_hjb",
]
