"""Parameter studies: barrier against each parameter, value curves, f curves and
the concavity threshold in risk aversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import __version__
from .barrier import DEFAULT_TOL, MultipleRoots, NoRoot, f, solve_barrier
from .model import ModelParams, ParameterError, RegimeTag, classify_regime
from .tables import Table
from .value import (
    DEFAULT_CONCAVITY_GRID,
    ClosedFormSolution,
    PayAllSolution,
    Status,
    build_solution,
    check_concavity,
)

VARIABLES = ("gamma", "rho", "a", "b")
OUTPUTS = ("x_tilde", "concave", "c1", "c3", "gamma_bar")
DEFAULT_OUTPUTS = ("x_tilde", "concave", "c1", "c3")

# (lo, hi, n) of the default sweep grids
DEFAULT_GRIDS = {
    "gamma": (0.001, 0.1397, 50),
    "rho": (0.05, 0.5, 46),
    "a": (0.5, 2.0, 31),
    "b": (0.1, 0.5, 41),
}
ANCHOR = ModelParams(a=1.0, b=0.25, rho=0.2, gamma=0.13)


class NotFound(RuntimeError):
    """No risk aversion in the search range gives a concave barrier solution."""


def default_grid(varied: str) -> list[float]:
    lo, hi, n = DEFAULT_GRIDS[varied]
    return [float(v) for v in np.linspace(lo, hi, n)]


@dataclass(frozen=True)
class SweepSpec:
    varied: str
    grid: tuple[float, ...]
    fixed: ModelParams = ANCHOR
    outputs: tuple[str, ...] = DEFAULT_OUTPUTS
    tol: float = DEFAULT_TOL
    n_grid: int = DEFAULT_CONCAVITY_GRID
    gamma_bar_tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.varied not in VARIABLES:
            raise ValueError(f"varied must be one of {VARIABLES}, got {self.varied!r}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly ascending")
        for v in grid:
            self.fixed.with_(**{self.varied: v})  # raises ParameterError
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ValueError(f"unknown outputs {bad}; choose from {OUTPUTS}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @classmethod
    def default(cls, varied: str, fixed: ModelParams = ANCHOR, **kwargs) -> "SweepSpec":
        return cls(varied=varied, grid=tuple(default_grid(varied)), fixed=fixed, **kwargs)


def _concave_barrier(params: ModelParams, tol: float, n_grid: int) -> bool:
    try:
        root = solve_barrier(params, tol=tol)
    except (NoRoot, MultipleRoots):
        return False
    return check_concavity(build_solution(params, root.x_tilde), n_grid=n_grid).concave


def gamma_bar(params: ModelParams, tol: float = 1e-4, solver_tol: float = DEFAULT_TOL,
              n_grid: int = DEFAULT_CONCAVITY_GRID) -> float:
    """Largest risk aversion whose barrier solution is unique and strictly concave.

    Bisection on ``(tol, 2a/b^2)`` down to bracket width ``tol``; the returned
    value is the last passing end of the bracket. ``params.gamma`` is ignored.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    hi = params.pay_all_threshold
    lo = tol
    if lo >= hi or not _concave_barrier(params.with_(gamma=lo), solver_tol, n_grid):
        raise NotFound(f"concavity fails already at gamma={lo:g} for {params.as_dict()}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _concave_barrier(params.with_(gamma=mid), solver_tol, n_grid):
            lo = mid
        else:
            hi = mid
    return lo


def _row(spec: SweepSpec, value: float) -> dict:
    params = spec.fixed.with_(**{spec.varied: value})
    row = {spec.varied: value, "status": None, "x_tilde": None, "concave": None,
           "c1": None, "c3": None, "gamma_bar": None}
    if "gamma_bar" in spec.outputs:
        try:
            row["gamma_bar"] = gamma_bar(params, tol=spec.gamma_bar_tol, solver_tol=spec.tol,
                                         n_grid=spec.n_grid)
        except NotFound:
            row["gamma_bar"] = float("nan")
    if classify_regime(params).tag is RegimeTag.PAY_ALL:
        row["status"] = Status.PAY_ALL.value
        row["x_tilde"] = 0.0
        return row
    try:
        root = solve_barrier(params, tol=spec.tol)
    except NoRoot:
        row["status"] = "NoRoot"
        return row
    except MultipleRoots:
        row["status"] = "MultipleRoots"
        return row
    sol = build_solution(params, root.x_tilde)
    concave = check_concavity(sol, n_grid=spec.n_grid).concave
    row.update(
        status=(Status.BARRIER_EQUILIBRIUM if concave else Status.INDETERMINATE).value,
        x_tilde=sol.x_tilde, concave=concave, c1=sol.c1, c3=sol.c3,
    )
    return row


def sweep_barrier(spec: SweepSpec) -> Table:
    """One row per grid value; failed rows are kept and flagged in ``status``.

    Rows are solved independently of each other, so their content does not
    depend on grid order.
    """
    columns = [spec.varied, "status"] + [o for o in OUTPUTS if o in spec.outputs]
    table = Table(columns, meta={
        "tool": f"mvdividend {__version__}",
        "sweep": spec.varied,
        "fixed": {k: v for k, v in spec.fixed.as_dict().items() if k != spec.varied},
        "tol": spec.tol,
        "concavity_grid": spec.n_grid,
    })
    for v in spec.grid:
        table.append(_row(spec, v))
    return table


def value_curve(sol: ClosedFormSolution | PayAllSolution, x_grid) -> Table:
    """Closed-form V, V', V'', G, H on a grid (left derivatives at the barrier)."""
    xs = np.asarray(x_grid, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x_grid must be nonnegative")
    cols = {
        "x": xs,
        "V": sol.V(xs, 0, "left"),
        "V1": sol.V(xs, 1, "left"),
        "V2": sol.V(xs, 2, "left"),
        "G": sol.G(xs, 0, "left"),
        "H": sol.H(xs, 0, "left"),
    }
    table = Table(list(cols), meta={
        "tool": f"mvdividend {__version__}",
        "params": sol.params.as_dict(),
        "barrier": sol.barrier,
    })
    arrays = [np.broadcast_to(np.asarray(c, dtype=float), xs.shape) for c in cols.values()]
    for i in range(xs.size):
        table.append([float(c[i]) for c in arrays])
    return table


def f_curve(params: ModelParams, x_grid) -> Table:
    xs = np.asarray(x_grid, dtype=float)
    vals = np.atleast_1d(f(xs, params))
    table = Table(["x", "f"], meta={"tool": f"mvdividend {__version__}", "params": params.as_dict()})
    for x, v in zip(xs, vals):
        table.append([float(x), float(v)])
    return table


__all__ = [
    "DEFAULT_GRIDS",
    "NotFound",
    "ParameterError",
    "SweepSpec",
    "default_grid",
    "f_curve",
    "gamma_bar",
    "sweep_barrier",
    "value_curve",
]
