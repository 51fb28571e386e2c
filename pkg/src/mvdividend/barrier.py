"""The barrier equation f(x, gamma) = 0 and its positive roots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    CharacteristicRoots,
    ModelParams,
    RegimeMismatch,
    RegimeTag,
    characteristic_roots,
    classify_regime,
)

DEFAULT_TOL = 1e-10
# roots are polished past `tol` so V'' at the barrier sits at round-off level
_F_FLOOR = 1e-14
DEFAULT_N_SCAN = 2048
SCAN_X_MAX_FACTOR = 20.0


class BarrierError(RuntimeError):
    pass


class NoRoot(BarrierError):
    """No sign change of f on the scan interval."""


class MultipleRoots(BarrierError):
    """More than one sign change of f on the scan interval."""

    def __init__(self, message: str, roots: list["BarrierSolution"]):
        super().__init__(message)
        self.roots = roots


@dataclass(frozen=True)
class BarrierSolution:
    x_tilde: float
    bracket: tuple[float, float]
    residual: float
    root_count_on_scan: int


def _ratios(x, r_pos: float, r_neg: float):
    """Return (r+^2 e+ - r-^2 e-)/(r+ e+ - r- e-) and (e+ - e-)/(r+ e+ - r- e-).

    e^{r+ x} is factored out so only e^{(r- - r+) x} <= 1 is ever formed.
    """
    e = np.exp((r_neg - r_pos) * x)
    den = r_pos - r_neg * e
    return (r_pos * r_pos - r_neg * r_neg * e) / den, (1.0 - e) / den


def f(x, params: ModelParams, roots: CharacteristicRoots | None = None):
    """Barrier function; its positive zero is the equilibrium barrier.

    Accepts a scalar or an array of ``x >= 0``. ``f(0) = gamma - 2a/b^2``
    exactly and ``f(x) -> r1 + gamma (2 - r3/r1)`` as ``x -> inf``.
    """
    if roots is None:
        roots = characteristic_roots(params)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("f is defined for x >= 0 only")
    gam = params.gamma
    r12, q12 = _ratios(xa, roots.r1, roots.r2)
    r34, _ = _ratios(xa, roots.r3, roots.r4)
    out = r12 + gam * (1.0 + q12 * (r12 - r34))
    out = np.where(xa == 0.0, gam - params.pay_all_threshold, out)
    return float(out) if out.ndim == 0 else out


def f_limit(params: ModelParams, roots: CharacteristicRoots | None = None) -> float:
    """Limit of f(x) as x -> infinity."""
    if roots is None:
        roots = characteristic_roots(params)
    return roots.r1 + params.gamma * (2.0 - roots.r3 / roots.r1)


def taksar_barrier(params: ModelParams) -> float:
    """Optimal barrier of the risk-neutral (gamma = 0) problem; gamma is ignored."""
    a, b2, rho = params.a, params.b**2, params.rho
    s = math.sqrt(a * a + 2.0 * rho * b2)
    # ln((s+a)/(s-a)) with s - a = 2 rho b^2 / (s + a)
    return b2 / s * math.log1p(a * (s + a) / (rho * b2))


def _refine(fun, lo: float, hi: float, flo: float, fhi: float, tol: float,
            max_iter: int = 200) -> tuple[float, float, float, float]:
    """Shrink a sign-change bracket with Illinois-modified secant steps.

    A bisection step is forced whenever two consecutive steps fail to halve
    the bracket. Returns ``(root, lo, hi, |f(root)|)``.
    """
    side = 0
    width_before = hi - lo
    stalls = 0
    for _ in range(max_iter):
        width = hi - lo
        x = lo - flo * width / (fhi - flo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = fun(x)
        if width <= tol and abs(fx) <= min(tol, _F_FLOOR):
            return x, lo, hi, abs(fx)
        if fx == 0.0:
            return x, x, x, 0.0
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo > 0.5 * width_before:
            stalls += 1
        else:
            stalls = 0
            width_before = hi - lo
        if stalls >= 2:
            mid = 0.5 * (lo + hi)
            fmid = fun(mid)
            if fmid == 0.0:
                return mid, mid, mid, 0.0
            if (fmid < 0) == (flo < 0):
                lo, flo = mid, fmid
            else:
                hi, fhi = mid, fmid
            stalls, side = 0, 0
            width_before = hi - lo
        if hi - lo <= 4.0 * np.spacing(hi):
            break
    # bracket at floating-point resolution: report the better end of it
    x = lo - flo * (hi - lo) / (fhi - flo)
    if not lo <= x <= hi:
        x = 0.5 * (lo + hi)
    return x, lo, hi, abs(fun(x))


def _scan(params: ModelParams, roots: CharacteristicRoots, x_max: float, n_scan: int):
    if n_scan < 2:
        raise ValueError("n_scan must be >= 2")
    if x_max <= 0:
        raise ValueError("x_max must be > 0")
    xs = np.linspace(0.0, x_max, n_scan)
    # x = 0 is a root only in the boundary case gamma = 2a/b^2; interior roots only
    xs[0] = x_max * 1e-9
    fs = f(xs, params, roots)
    cells = []
    for i in range(n_scan - 1):
        if fs[i] == 0.0:
            cells.append((xs[i], xs[i], 0.0, 0.0))
        elif fs[i] * fs[i + 1] < 0.0:
            cells.append((xs[i], xs[i + 1], fs[i], fs[i + 1]))
    if fs[-1] == 0.0:
        cells.append((xs[-1], xs[-1], 0.0, 0.0))
    return cells


def _default_x_max(params: ModelParams) -> float:
    return SCAN_X_MAX_FACTOR * taksar_barrier(params)


def find_all_roots(params: ModelParams, x_max: float | None = None,
                   n_scan: int = DEFAULT_N_SCAN, tol: float = DEFAULT_TOL) -> list[BarrierSolution]:
    """Refine one root per sign-change cell of the scan grid, ascending."""
    roots = characteristic_roots(params)
    if x_max is None:
        x_max = _default_x_max(params)
    cells = _scan(params, roots, x_max, n_scan)

    def fun(x: float) -> float:
        return float(f(x, params, roots))

    out = []
    for lo, hi, flo, fhi in cells:
        if lo == hi:
            out.append(BarrierSolution(float(lo), (float(lo), float(hi)), 0.0, len(cells)))
            continue
        x, blo, bhi, res = _refine(fun, lo, hi, flo, fhi, tol)
        out.append(BarrierSolution(float(x), (float(blo), float(bhi)), float(res), len(cells)))
    return out


def solve_barrier(params: ModelParams, tol: float = DEFAULT_TOL, x_max: float | None = None,
                  n_scan: int = DEFAULT_N_SCAN) -> BarrierSolution:
    """Unique positive root of f for gamma < 2a/b^2.

    Raises:
        RegimeMismatch: gamma >= 2a/b^2.
        NoRoot: no sign change on ``[0, x_max]``.
        MultipleRoots: more than one sign change; the refined roots are
            attached to the exception.
    """
    if classify_regime(params).tag is RegimeTag.PAY_ALL:
        raise RegimeMismatch(
            f"gamma={params.gamma} >= 2a/b^2={params.pay_all_threshold}: pay-all regime"
        )
    found = find_all_roots(params, x_max=x_max, n_scan=n_scan, tol=tol)
    if not found:
        raise NoRoot(f"f has no sign change on [0, {x_max if x_max else _default_x_max(params)}]")
    if len(found) > 1:
        xs = ", ".join(f"{s.x_tilde:.10g}" for s in found)
        raise MultipleRoots(f"f has {len(found)} sign changes (roots at {xs})", found)
    return found[0]
