"""Closed-form moment functions, the equilibrium value function and HJB checks.

``G(x) = E_x[Y]`` and ``H(x) = E_x[Y^2]`` are the first two moments of the
discounted dividends ``Y`` under a barrier strategy; the mean-variance value
is ``V = G - gamma/2 (H - G^2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .barrier import (
    DEFAULT_N_SCAN,
    DEFAULT_TOL,
    BarrierError,
    BarrierSolution,
    solve_barrier,
)
from .model import (
    CharacteristicRoots,
    ModelParams,
    RegimeMismatch,
    RegimeTag,
    characteristic_roots,
    classify_regime,
)

DEFAULT_CONCAVITY_GRID = 10_001
DEFAULT_VERIFY_GRID = 2001
DEFAULT_TOL_RES = 1e-8
DEFAULT_TOL_INEQ = 1e-12
PAY_WINDOW = 10.0


class DegenerateBarrier(ValueError):
    pass


def _as_array(x):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("moment functions are defined for x >= 0 only")
    return xa


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


class _Moments:
    """Shared V, its derivatives and the HJB operator, given G and H."""

    params: ModelParams

    def _gh(self, x, side: str):  # pragma: no cover - abstract
        raise NotImplementedError

    def G(self, x, order: int = 0, side: str = "right"):
        return _out(self._gh(_as_array(x), side)[0][order])

    def H(self, x, order: int = 0, side: str = "right"):
        return _out(self._gh(_as_array(x), side)[1][order])

    def V(self, x, order: int = 0, side: str = "right"):
        (g0, g1, g2), (h0, h1, h2) = self._gh(_as_array(x), side)
        gam = self.params.gamma
        if order == 0:
            v = g0 - 0.5 * gam * (h0 - g0 * g0)
        elif order == 1:
            v = g1 - 0.5 * gam * (h1 - 2.0 * g0 * g1)
        elif order == 2:
            v = g2 - 0.5 * gam * (h2 - 2.0 * g1 * g1 - 2.0 * g0 * g2)
        else:
            raise ValueError("order must be 0, 1 or 2")
        return _out(v)

    def hjb_terms(self, x, side: str = "right") -> dict[str, np.ndarray]:
        """Residuals of the extended HJB system at ``x``.

        ``M phi = a phi' + b^2/2 phi''``. Returns the G and H ODE residuals,
        the first term of the V variational inequality (computed from V's own
        derivatives, not simplified through the G/H identities) and
        ``1 - V'``.
        """
        xa = _as_array(x)
        p = self.params
        (g0, g1, g2), (h0, h1, h2) = self._gh(xa, side)
        half_b2 = 0.5 * p.b**2
        gam = p.gamma
        v1 = g1 - 0.5 * gam * (h1 - 2.0 * g0 * g1)
        v2 = g2 - 0.5 * gam * (h2 - 2.0 * g1 * g1 - 2.0 * g0 * g2)
        mg = p.a * g1 + half_b2 * g2
        mh = p.a * h1 + half_b2 * h2
        mv = p.a * v1 + half_b2 * v2
        mg2 = p.a * 2.0 * g0 * g1 + half_b2 * (2.0 * g1 * g1 + 2.0 * g0 * g2)
        first = mv - 0.5 * gam * mg2 + gam * g0 * mg - p.rho * g0 + gam * p.rho * (h0 - g0 * g0)
        return {
            "g_ode": mg - p.rho * g0,
            "h_ode": mh - 2.0 * p.rho * h0,
            "v_first": first,
            "one_minus_vprime": 1.0 - v1,
            "g_gradient": g1 - 1.0,
            "h_gradient": h1 - 2.0 * g0,
        }


@dataclass(frozen=True, eq=False)
class ClosedFormSolution(_Moments):
    """Barrier strategy with constant barrier ``x_tilde``.

    Below the barrier G and H solve their homogeneous ODEs with zero boundary
    value; above it they are continued linearly/quadratically so that
    ``G' = 1`` and ``H' = 2G``. ``c1`` and ``c3`` make both C^1 at the barrier.
    """

    params: ModelParams
    roots: CharacteristicRoots
    x_tilde: float
    c1: float
    c3: float

    @property
    def barrier(self) -> float:
        return self.x_tilde

    def _gh(self, x, side: str = "right"):
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        r, xt = self.roots, self.x_tilde
        nt = x < xt if side == "right" else x <= xt
        # clamp so the exponentials are only formed on the bounded NT branch
        xn = np.where(nt, x, xt)
        e1, e2 = np.exp(r.r1 * xn), np.exp(r.r2 * xn)
        e3, e4 = np.exp(r.r3 * xn), np.exp(r.r4 * xn)
        c1, c3 = self.c1, self.c3
        g_nt = (c1 * (e1 - e2), c1 * (r.r1 * e1 - r.r2 * e2), c1 * (r.r1**2 * e1 - r.r2**2 * e2))
        h_nt = (c3 * (e3 - e4), c3 * (r.r3 * e3 - r.r4 * e4), c3 * (r.r3**2 * e3 - r.r4**2 * e4))
        gt, ht = self.G_at_barrier, self.H_at_barrier
        u = x - xt
        g_pay = (gt + u, np.ones_like(x), np.zeros_like(x))
        h_pay = (ht + 2.0 * gt * u + u * u, 2.0 * (gt + u), np.full_like(x, 2.0))
        g = tuple(np.where(nt, a, b) for a, b in zip(g_nt, g_pay))
        h = tuple(np.where(nt, a, b) for a, b in zip(h_nt, h_pay))
        return g, h

    @property
    def G_at_barrier(self) -> float:
        r, xt = self.roots, self.x_tilde
        return self.c1 * (math.exp(r.r1 * xt) - math.exp(r.r2 * xt))

    @property
    def H_at_barrier(self) -> float:
        r, xt = self.roots, self.x_tilde
        return self.c3 * (math.exp(r.r3 * xt) - math.exp(r.r4 * xt))

    def V2_product_form(self, x):
        """V'' below the barrier as the prefactor times ``g(x, x_tilde)``.

        Independent of :meth:`V` (which differentiates the branch formulas);
        the two must agree on ``[0, x_tilde)``.
        """
        xa = _as_array(x)
        r, xt, gam = self.roots, self.x_tilde, self.params.gamma
        e1, e2 = np.exp(r.r1 * xa), np.exp(r.r2 * xa)
        e3, e4 = np.exp(r.r3 * xa), np.exp(r.r4 * xa)
        e1t, e2t = math.exp(r.r1 * xt), math.exp(r.r2 * xt)
        d1t = r.r1 * e1t - r.r2 * e2t
        d3t = r.r3 * math.exp(r.r3 * xt) - r.r4 * math.exp(r.r4 * xt)
        d1 = r.r1 * e1 - r.r2 * e2
        n1 = r.r1**2 * e1 - r.r2**2 * e2
        n3 = r.r3**2 * e3 - r.r4**2 * e4
        g = n1 / d1 + gam * (d1 / d1t + (e1 - e2) * n1 / (d1t * d1) - (e1t - e2t) * n3 / (d3t * d1))
        return _out(d1 / d1t * g)


@dataclass(frozen=True, eq=False)
class PayAllSolution(_Moments):
    """Pay the whole surplus immediately: ``V = G = x``, ``H = x^2``."""

    params: ModelParams

    @property
    def barrier(self) -> float:
        return 0.0

    def _gh(self, x, side: str = "right"):
        return (x, np.ones_like(x), np.zeros_like(x)), (x * x, 2.0 * x, np.full_like(x, 2.0))


def build_solution(params: ModelParams, x_tilde: float) -> ClosedFormSolution:
    if not x_tilde > 0:
        raise DegenerateBarrier(f"barrier must be > 0, got {x_tilde}")
    r = characteristic_roots(params)
    e1, e2 = math.exp(r.r1 * x_tilde), math.exp(r.r2 * x_tilde)
    d1 = r.r1 * e1 - r.r2 * e2
    d3 = r.r3 * math.exp(r.r3 * x_tilde) - r.r4 * math.exp(r.r4 * x_tilde)
    return ClosedFormSolution(
        params=params,
        roots=r,
        x_tilde=float(x_tilde),
        c1=1.0 / d1,
        c3=2.0 * (e1 - e2) / (d1 * d3),
    )


def pay_all_solution(params: ModelParams) -> PayAllSolution:
    if classify_regime(params).tag is not RegimeTag.PAY_ALL:
        raise RegimeMismatch(
            f"pay-all requires gamma >= 2a/b^2 = {params.pay_all_threshold}, got {params.gamma}"
        )
    return PayAllSolution(params)


@dataclass(frozen=True)
class ConcavityResult:
    concave: bool
    first_violation: float | None
    max_second_derivative: float


def check_concavity(sol: ClosedFormSolution, n_grid: int = DEFAULT_CONCAVITY_GRID,
                    tol_strict: float = 0.0) -> ConcavityResult:
    """Strict concavity of V on the interior nodes of a uniform grid over (0, x_tilde)."""
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    xs = np.linspace(0.0, sol.x_tilde, n_grid)[1:-1]
    if xs.size == 0:
        return ConcavityResult(True, None, -math.inf)
    v2 = np.asarray(sol.V(xs, order=2, side="left"))
    bad = np.nonzero(v2 >= -tol_strict)[0]
    first = float(xs[bad[0]]) if bad.size else None
    return ConcavityResult(concave=bad.size == 0, first_violation=first,
                           max_second_derivative=float(v2.max()))


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    region: str
    worst_residual: float
    worst_location: float | None
    tolerance: float
    passed: bool


@dataclass
class VerificationReport:
    records: list[ConditionRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[ConditionRecord]:
        return [r for r in self.records if not r.passed]

    def __getitem__(self, name: str) -> ConditionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "conditions": [asdict(r) for r in self.records]}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _abs_record(name, region, xs, resid, tol) -> ConditionRecord:
    a = np.abs(resid)
    i = int(np.argmax(a))
    worst = float(a[i])
    return ConditionRecord(name, region, worst, float(xs[i]), tol, worst <= tol)


def _upper_record(name, region, xs, value, tol) -> ConditionRecord:
    i = int(np.argmax(value))
    worst = float(value[i])
    return ConditionRecord(name, region, worst, float(xs[i]), tol, worst <= tol)


def verify_hjb(sol: ClosedFormSolution | PayAllSolution, n_grid: int = DEFAULT_VERIFY_GRID,
               x_max: float | None = None, tol_res: float = DEFAULT_TOL_RES,
               tol_ineq: float = DEFAULT_TOL_INEQ) -> VerificationReport:
    """Check the extended HJB system, boundary values and pasting on grids.

    The no-transaction region is ``[0, x_tilde)`` and the pay region
    ``[x_tilde, x_max]``; second derivatives at the barrier are one-sided.
    Equalities are checked as ``|residual| <= tol_res``, inequalities as
    ``value <= tol_ineq``.
    """
    xt = sol.barrier
    if x_max is None:
        x_max = xt + PAY_WINDOW
    report = VerificationReport()
    recs = report.records

    if xt > 0:
        xs = np.linspace(0.0, xt, n_grid)[:-1]
        t = sol.hjb_terms(xs, side="right")
        recs.append(_abs_record("hjb_g", "NT", xs, t["g_ode"], tol_res))
        recs.append(_abs_record("hjb_h", "NT", xs, t["h_ode"], tol_res))
        recs.append(_abs_record("hjb_v", "NT", xs, t["v_first"], tol_res))
        recs.append(_upper_record("nt_gradient", "NT", xs, t["one_minus_vprime"], tol_ineq))

    xs = np.linspace(xt, x_max, n_grid)
    t = sol.hjb_terms(xs, side="right")
    recs.append(_abs_record("v_gradient", "Pay", xs, t["one_minus_vprime"], tol_res))
    recs.append(_abs_record("g_gradient", "Pay", xs, t["g_gradient"], tol_res))
    recs.append(_abs_record("h_gradient", "Pay", xs, t["h_gradient"], tol_res))
    recs.append(_upper_record("hjb_v_first_term", "Pay", xs, t["v_first"], tol_ineq))

    at0 = max(abs(sol.V(0.0)), abs(sol.G(0.0)), abs(sol.H(0.0)))
    recs.append(ConditionRecord("boundary", "x=0", at0, 0.0, 0.0, at0 == 0.0))

    if isinstance(sol, ClosedFormSolution):
        conc = check_concavity(sol, n_grid=n_grid)
        loc = conc.first_violation
        recs.append(ConditionRecord("nt_strict_concavity", "NT", conc.max_second_derivative,
                                    loc, 0.0, conc.concave))

    if xt > 0:
        dg = abs(sol.G(xt, 1, "left") - sol.G(xt, 1, "right"))
        dh = abs(sol.H(xt, 1, "left") - sol.H(xt, 1, "right"))
        v2 = max(abs(sol.V(xt, 2, "left")), abs(sol.V(xt, 2, "right")))
        recs.append(ConditionRecord("pasting_g", "barrier", dg, xt, tol_res, dg <= tol_res))
        recs.append(ConditionRecord("pasting_h", "barrier", dh, xt, tol_res, dh <= tol_res))
        recs.append(ConditionRecord("v_second_at_barrier", "barrier", v2, xt, tol_res, v2 <= tol_res))
    return report


class Status(str, Enum):
    PAY_ALL = "PayAll"
    BARRIER_EQUILIBRIUM = "BarrierEquilibrium"
    INDETERMINATE = "Indeterminate"


INDETERMINATE_NOTE = (
    "the barrier candidate's value function is not strictly concave below the barrier; "
    "no equilibrium is constructed for this risk aversion"
)


@dataclass(frozen=True)
class Equilibrium:
    status: Status
    solution: ClosedFormSolution | PayAllSolution
    barrier: BarrierSolution | None = None
    concavity: ConcavityResult | None = None


def solve_equilibrium(params: ModelParams, tol: float = DEFAULT_TOL, x_max: float | None = None,
                      n_scan: int = DEFAULT_N_SCAN,
                      n_grid: int = DEFAULT_CONCAVITY_GRID) -> Equilibrium:
    """Dispatch on the regime and classify the result.

    Raises the barrier module's NoRoot/MultipleRoots when the barrier
    equation has no unique root.
    """
    if classify_regime(params).tag is RegimeTag.PAY_ALL:
        return Equilibrium(Status.PAY_ALL, pay_all_solution(params))
    root = solve_barrier(params, tol=tol, x_max=x_max, n_scan=n_scan)
    sol = build_solution(params, root.x_tilde)
    conc = check_concavity(sol, n_grid=n_grid)
    status = Status.BARRIER_EQUILIBRIUM if conc.concave else Status.INDETERMINATE
    return Equilibrium(status, sol, root, conc)


__all__ = [
    "BarrierError",
    "ClosedFormSolution",
    "ConcavityResult",
    "ConditionRecord",
    "DegenerateBarrier",
    "Equilibrium",
    "PayAllSolution",
    "Status",
    "VerificationReport",
    "build_solution",
    "check_concavity",
    "pay_all_solution",
    "solve_equilibrium",
    "verify_hjb",
]
