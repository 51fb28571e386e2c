"""Monte Carlo oracle for the moments of discounted dividends.

The surplus follows an Euler scheme ``X += a dt + b sqrt(dt) xi``; any
overshoot above the barrier is paid out as a dividend and the surplus is set
back to the barrier, and the path is ruined the first time ``X <= 0``.
Dividends paid at the end of step ``k`` are discounted by ``exp(-rho (k+1) dt)``.
A surplus above the barrier at time 0 is paid as an undiscounted lump.

Two ways of handling the infinite horizon are offered:

``"truncate"``
    Stop at ``t_max``. Biased low by at most ``exp(-rho t_max) (a/rho + barrier)``
    in expectation.
``"randomized"``
    Discount deterministically up to ``t_max`` and replace the remaining
    discount factors by two independent geometric killing clocks ``N1, N2``
    (``P(N > j) = exp(-rho (j+1) dt)``). Each clock gives an unbiased replicate
    of the path's discounted dividends, and the two are conditionally
    independent, so their mean estimates ``E[Y]`` and their product ``E[Y^2]``
    without truncation bias. The clock length enters through the control
    variate ``a dt (N - E[N])``, which has zero mean and removes most of the
    clock noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np
from numba import int32, int64, uint64

from .model import ModelParams
from .rng import ZIG_F, ZIG_K, ZIG_W, next_u64, normal_slow, stream_state, to_unit
from .value import ClosedFormSolution, PayAllSolution

TAILS = ("truncate", "randomized")
MAX_TRUNCATED_FRACTION = 0.01
MIN_RHO_T_MAX = 10.0
DEFAULT_RHO_T_MAX = 60.0


class SimulationError(RuntimeError):
    pass


class ExcessTruncation(SimulationError):
    """Too many paths reached the horizon while the discounted tail is not negligible."""


@dataclass(frozen=True)
class SimConfig:
    """Discretization and sampling controls.

    ``t_max=None`` resolves to ``60 / rho`` when the model is known.
    ``bridge=True`` samples the within-step maximum and zero crossing of the
    surplus from the Brownian-bridge law instead of monitoring only the grid
    points, which removes most of the O(sqrt(dt)) boundary bias.
    """

    dt: float = 1e-3
    n_paths: int = 10_000
    t_max: float | None = None
    seed: int = 0
    x0: float = 0.0
    tail: str = "truncate"
    bridge: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not self.x0 >= 0:
            raise ValueError(f"x0 must be >= 0, got {self.x0}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.tail not in TAILS:
            raise ValueError(f"tail must be one of {TAILS}, got {self.tail!r}")
        if self.t_max is not None:
            if self.t_max < 0 or (self.tail == "truncate" and self.dt > self.t_max):
                raise ValueError(f"need dt <= t_max, got dt={self.dt}, t_max={self.t_max}")

    def horizon(self, rho: float) -> float:
        return DEFAULT_RHO_T_MAX / rho if self.t_max is None else float(self.t_max)

    def with_(self, **changes) -> "SimConfig":
        values = asdict(self)
        values.update(changes)
        return SimConfig(**values)


@dataclass(frozen=True)
class PathResult:
    """One simulated path.

    ``y`` estimates the path's discounted dividends (exact in truncate mode);
    ``y_pair`` holds the two clock replicates (both equal to ``y`` when
    truncating). ``ruin_time`` is None when the path ended without ruin.
    """

    y: float
    y_pair: tuple[float, float]
    ruin_time: float | None
    truncated: bool
    initial_lump: float


@dataclass(frozen=True)
class SimEstimate:
    g_hat: float
    h_hat: float
    v_hat: float
    se_g: float
    se_h: float
    n_paths: int
    truncated_fraction: float
    ruin_fraction: float
    truncation_bound: float
    barrier: float
    gamma: float
    config: SimConfig
    params: ModelParams

    @property
    def var_hat(self) -> float:
        return self.h_hat - self.g_hat**2

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "g_hat", "h_hat", "v_hat", "se_g", "se_h", "n_paths", "truncated_fraction",
            "ruin_fraction", "truncation_bound", "barrier", "gamma")}
        out["var_hat"] = self.var_hat
        out["config"] = asdict(self.config)
        out["params"] = self.params.as_dict()
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@nb.njit(inline="never")
def _bridge_step(x, y, barrier, s2dt, cut, s0, s1, s2, s3):
    """Exact-in-law barrier payment and ruin test over one step given its endpoints.

    Given the free path runs from ``x`` to ``y``, its maximum is sampled from
    the Brownian-bridge law and the excess over the barrier is paid. A path
    that stays positive at both ends is ruined with the bridge probability of
    touching zero in between.
    """
    paid = 0.0
    if (barrier - x) * (barrier - y) < cut:
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        m = 0.5 * (x + y + math.sqrt((y - x) ** 2 - 2.0 * s2dt * math.log(to_unit(u))))
        if m > barrier:
            paid = m - barrier
    y -= paid
    dead = y <= 0.0
    if not dead and x * y < cut:
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        dead = to_unit(u) < math.exp(-2.0 * x * y / s2dt)
    return y, paid, dead, s0, s1, s2, s3


@nb.njit(parallel=True, cache=True)
def _kernel(first, count, seed, x0, barrier, a, b, rho, dt, n_det, randomized, bridge,
            kn, wn, fn):
    y1 = np.empty(count)
    y2 = np.empty(count)
    ruin_step = np.empty(count, dtype=np.int64)
    truncated = np.zeros(count, dtype=np.bool_)
    q = math.exp(-rho * dt)
    sq = b * math.sqrt(dt)
    ad = a * dt
    log_q = -rho * dt
    mean_n = q / (1.0 - q)
    s2dt = b * b * dt
    cut = 25.0 * s2dt  # crossing probabilities below exp(-50) are ignored
    for p in nb.prange(count):
        s0, s1, s2, s3 = stream_state(seed, uint64(first + p))
        n1 = int64(0)
        n2 = int64(0)
        if randomized:
            u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
            n1 = int64(math.floor(math.log(to_unit(u)) / log_q))
            u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
            n2 = int64(math.floor(math.log(to_unit(u)) / log_q))
        lump = max(x0 - barrier, 0.0)
        x = min(x0, barrier)
        acc = 0.0
        disc = 1.0
        step = int64(-1)
        if x <= 0.0:
            step = 0
        # deterministic discounting up to the horizon
        k = int64(0)
        while step < 0 and k < n_det:
            u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
            hz = int64(int32(u >> uint64(32)))
            iz = int64(u & uint64(127))
            if abs(hz) < kn[iz]:
                z = hz * wn[iz]
            else:
                z, s0, s1, s2, s3 = normal_slow(hz, iz, s0, s1, s2, s3, kn, wn, fn)
            xp = x
            x += ad + sq * z
            disc *= q
            k += 1
            if bridge and ((barrier - xp) * (barrier - x) < cut or xp * x < cut):
                x, paid, dead, s0, s1, s2, s3 = _bridge_step(xp, x, barrier, s2dt, cut,
                                                             s0, s1, s2, s3)
                acc += disc * paid
                if dead:
                    step = k
            elif x <= 0.0:
                step = k
            elif x > barrier:
                acc += disc * (x - barrier)
                x = barrier
        acc1 = acc
        acc2 = acc
        if step < 0 and randomized:
            # killing clocks: step n_det + 1 + j counts for clock i iff j < n_i
            n_lo = min(n1, n2)
            n_hi = max(n1, n2)
            lo = 0.0
            hi = 0.0
            j = int64(0)
            while step < 0 and j < n_hi:
                u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
                hz = int64(int32(u >> uint64(32)))
                iz = int64(u & uint64(127))
                if abs(hz) < kn[iz]:
                    z = hz * wn[iz]
                else:
                    z, s0, s1, s2, s3 = normal_slow(hz, iz, s0, s1, s2, s3, kn, wn, fn)
                xp = x
                x += ad + sq * z
                j += 1
                over = 0.0
                if bridge and ((barrier - xp) * (barrier - x) < cut or xp * x < cut):
                    x, over, dead, s0, s1, s2, s3 = _bridge_step(xp, x, barrier, s2dt, cut,
                                                                 s0, s1, s2, s3)
                    if dead:
                        step = n_det + j
                elif x <= 0.0:
                    step = n_det + j
                elif x > barrier:
                    over = x - barrier
                    x = barrier
                if over > 0.0:
                    if j <= n_lo:
                        lo += over
                    hi += over
            if n1 <= n2:
                acc1 += disc * (lo - ad * (n1 - mean_n))
                acc2 += disc * (hi - ad * (n2 - mean_n))
            else:
                acc1 += disc * (hi - ad * (n1 - mean_n))
                acc2 += disc * (lo - ad * (n2 - mean_n))
        elif step < 0:
            truncated[p] = True
        y1[p] = lump + acc1
        y2[p] = lump + acc2
        ruin_step[p] = step
    return y1, y2, ruin_step, truncated


def _n_det(cfg: SimConfig, rho: float) -> int:
    # smallest n with n*dt >= t_max
    t_max = cfg.horizon(rho)
    return max(int(math.ceil(t_max / cfg.dt - 1e-9)), 0)


def _run(params: ModelParams, barrier: float, cfg: SimConfig, first: int = 0,
         count: int | None = None):
    if count is None:
        count = cfg.n_paths
    return _kernel(
        np.int64(first), np.int64(count), np.uint64(cfg.seed), float(cfg.x0), float(barrier),
        params.a, params.b, params.rho, cfg.dt, np.int64(_n_det(cfg, params.rho)),
        cfg.tail == "randomized", bool(cfg.bridge), ZIG_K, ZIG_W, ZIG_F,
    )


def set_threads(n: int | None) -> None:
    """Cap the number of worker threads used by the path loop."""
    if n is not None:
        nb.set_num_threads(max(1, min(int(n), nb.config.NUMBA_NUM_THREADS)))


def simulate_path(sol: ClosedFormSolution | PayAllSolution, cfg: SimConfig,
                  stream: int = 0) -> PathResult:
    """Simulate path number ``stream`` of the run described by ``cfg``.

    Identical, bit for bit, to path ``stream`` inside :func:`estimate_moments`.
    """
    y1, y2, step, trunc = _run(sol.params, sol.barrier, cfg, first=stream, count=1)
    ruin = None if step[0] < 0 else float(step[0]) * cfg.dt
    return PathResult(
        y=0.5 * (float(y1[0]) + float(y2[0])),
        y_pair=(float(y1[0]), float(y2[0])),
        ruin_time=ruin,
        truncated=bool(trunc[0]),
        initial_lump=max(cfg.x0 - sol.barrier, 0.0),
    )


def _estimate(params: ModelParams, barrier: float, cfg: SimConfig) -> SimEstimate:
    y1, y2, step, trunc = _run(params, barrier, cfg)
    n = cfg.n_paths
    yg = 0.5 * (y1 + y2)
    yh = y1 * y2
    ddof = 1 if n > 1 else 0
    g_hat = float(np.mean(yg))
    h_hat = float(np.mean(yh))
    t_max = cfg.horizon(params.rho)
    bound = 0.0
    if cfg.tail == "truncate":
        bound = math.exp(-params.rho * t_max) * (params.a / params.rho + barrier)
    est = SimEstimate(
        g_hat=g_hat,
        h_hat=h_hat,
        v_hat=g_hat - 0.5 * params.gamma * (h_hat - g_hat**2),
        se_g=float(np.std(yg, ddof=ddof)) / math.sqrt(n),
        se_h=float(np.std(yh, ddof=ddof)) / math.sqrt(n),
        n_paths=n,
        truncated_fraction=float(np.mean(trunc)),
        ruin_fraction=float(np.mean(step >= 0)),
        truncation_bound=bound,
        barrier=float(barrier),
        gamma=params.gamma,
        config=cfg,
        params=params,
    )
    if (cfg.tail == "truncate" and est.truncated_fraction > MAX_TRUNCATED_FRACTION
            and params.rho * t_max < MIN_RHO_T_MAX):
        raise ExcessTruncation(
            f"{est.truncated_fraction:.1%} of paths truncated at t_max={t_max} "
            f"(rho*t_max={params.rho * t_max:.3g} < {MIN_RHO_T_MAX}); "
            "raise t_max or use tail='randomized'"
        )
    return est


def estimate_moments(sol: ClosedFormSolution | PayAllSolution, cfg: SimConfig) -> SimEstimate:
    """Sample moments of discounted dividends under the solution's strategy."""
    return _estimate(sol.params, sol.barrier, cfg)


@dataclass
class FrontierRow:
    barrier: float
    g_hat: float
    var_hat: float
    j_hat: float
    se_g: float


@dataclass
class Frontier:
    rows: list[FrontierRow] = field(default_factory=list)
    config: SimConfig | None = None
    params: ModelParams | None = None

    def best(self) -> FrontierRow:
        return max(self.rows, key=lambda r: r.j_hat)


def estimate_mv_frontier(params: ModelParams, barriers, cfg: SimConfig) -> Frontier:
    """Empirical mean-variance objective of barrier strategies from ``cfg.x0``.

    Every barrier reuses the same seed, so the comparison across barriers is
    made with common random numbers.
    """
    barriers = [float(v) for v in barriers]
    if any(not v > 0 for v in barriers):
        raise ValueError("barriers must be positive")
    out = Frontier(config=cfg, params=params)
    for beta in barriers:
        est = _estimate(params, beta, cfg)
        out.rows.append(FrontierRow(
            barrier=beta,
            g_hat=est.g_hat,
            var_hat=est.var_hat,
            j_hat=est.g_hat - 0.5 * params.gamma * est.var_hat,
            se_g=est.se_g,
        ))
    return out
