import math

import numpy as np
import pytest

from mvdividend import (
    ExcessTruncation,
    ModelParams,
    SimConfig,
    build_solution,
    estimate_moments,
    estimate_mv_frontier,
    simulate_path,
    solve_equilibrium,
)
from mvdividend.simulate import _run

P = ModelParams(1.0, 0.25, 0.2, 0.13)


def test_config_validation():
    for bad in (dict(dt=0), dict(n_paths=0), dict(n_paths=1.5), dict(x0=-1), dict(tail="x"),
                dict(seed=-1), dict(t_max=1e-4, dt=1e-3)):
        with pytest.raises(ValueError):
            SimConfig(**bad)
    assert SimConfig().horizon(0.2) == pytest.approx(300.0)
    assert SimConfig(t_max=7).horizon(0.2) == 7.0


def test_ruin_at_start(sol13):
    r = simulate_path(sol13, SimConfig(x0=0.0, dt=1e-3, t_max=1.0))
    assert r.y == 0.0 and r.ruin_time == 0.0 and not r.truncated


def test_initial_lump(sol13):
    cfg = SimConfig(x0=sol13.x_tilde + 1.0, dt=1e-3, t_max=0.001)
    r = simulate_path(sol13, cfg)
    assert r.initial_lump == 1.0
    # one step from the barrier: anything paid on top of the lump is discounted overshoot
    over = r.y - 1.0
    assert 0.0 <= over <= 0.25 * math.sqrt(1e-3) * 10


def test_deterministic_limit():
    p = ModelParams(1.0, 1e-6, 0.2, 0.13)
    sol = solve_equilibrium(p).solution
    dt, t_max = 1e-3, 20.0
    n = round(t_max / dt)
    q = math.exp(-p.rho * dt)
    exact = p.a * dt * q * (1 - q**n) / (1 - q)
    est = estimate_moments(sol, SimConfig(dt=dt, n_paths=4, t_max=100.0, seed=1, x0=sol.x_tilde))
    assert est.g_hat == pytest.approx(p.a / p.rho * (1 - math.exp(-p.rho * 100.0)), rel=1e-3)
    r = simulate_path(sol, SimConfig(dt=dt, n_paths=1, t_max=t_max, x0=sol.x_tilde, tail="randomized"))
    # randomized tail: the clock control variate cancels the drift exactly, leaving
    # only the O(b / sqrt(rho)) diffusion noise
    assert r.y_pair[0] == pytest.approx(p.a * dt * q / (1 - q), abs=1e-5)
    assert r.y_pair[1] == pytest.approx(r.y_pair[0], abs=1e-5)
    assert exact < r.y


def test_pay_all_is_exact():
    sol = solve_equilibrium(P.with_(gamma=40.0)).solution
    est = estimate_moments(sol, SimConfig(x0=2.0, n_paths=1000, dt=1e-3, t_max=1.0))
    assert est.g_hat == 2.0 and est.h_hat == 4.0
    assert est.se_g == 0.0 and est.se_h == 0.0 and est.var_hat == 0.0
    assert est.v_hat == 2.0


def test_reproducible_and_path_consistent(sol13):
    cfg = SimConfig(dt=1e-3, n_paths=300, t_max=2.0, seed=11, x0=0.2, tail="randomized")
    a = estimate_moments(sol13, cfg)
    b = estimate_moments(sol13, cfg)
    assert a.to_json() == b.to_json()
    y1, y2, step, _ = _run(sol13.params, sol13.barrier, cfg)
    for i in (0, 17, 299):
        r = simulate_path(sol13, cfg, stream=i)
        assert r.y_pair == (y1[i], y2[i])
        assert (r.ruin_time is None) == (step[i] < 0)
    assert estimate_moments(sol13, cfg.with_(seed=12)).g_hat != a.g_hat


def test_excess_truncation(sol13):
    cfg = SimConfig(dt=1e-2, n_paths=200, t_max=5.0, x0=0.2)
    with pytest.raises(ExcessTruncation):
        estimate_moments(sol13, cfg)
    est = estimate_moments(sol13, cfg.with_(t_max=50.0))
    assert est.truncated_fraction > 0.5  # allowed: the tail beyond rho*t_max = 10 is negligible
    est = estimate_moments(sol13, cfg.with_(tail="randomized"))
    assert est.truncated_fraction == 0.0


def test_truncation_bound(sol13):
    cfg = SimConfig(dt=1e-2, n_paths=2000, t_max=50.0, seed=3, x0=0.2)
    short = estimate_moments(sol13, cfg)
    y_short, *_ = _run(sol13.params, sol13.barrier, cfg)
    y_long, *_ = _run(sol13.params, sol13.barrier, cfg.with_(t_max=100.0))
    diff = y_long - y_short  # same streams: identical paths up to the shorter horizon
    assert np.all(diff >= 0)
    bound = math.exp(-0.2 * 50.0) * (1.0 / 0.2 + sol13.x_tilde)
    assert short.truncation_bound == pytest.approx(bound)
    assert diff.mean() <= bound + 3 * diff.std() / math.sqrt(diff.size)


def test_randomized_tail_matches_long_truncation(sol13):
    base = SimConfig(dt=1e-2, n_paths=4000, seed=21, x0=sol13.x_tilde / 2)
    trunc = estimate_moments(sol13, base)  # t_max = 60 / rho
    for t_max in (0.0, 2.5):
        rnd = estimate_moments(sol13, base.with_(tail="randomized", t_max=t_max, seed=22))
        zg = (rnd.g_hat - trunc.g_hat) / math.hypot(rnd.se_g, trunc.se_g)
        zh = (rnd.h_hat - trunc.h_hat) / math.hypot(rnd.se_h, trunc.se_h)
        assert abs(zg) < 4 and abs(zh) < 4


def test_second_moment_dominates_square(sol13):
    est = estimate_moments(sol13, SimConfig(dt=1e-2, n_paths=2000, t_max=2.5, x0=0.1,
                                            tail="randomized"))
    assert est.h_hat >= est.g_hat**2 - 3 * est.se_h
    est = estimate_moments(sol13, SimConfig(dt=1e-2, n_paths=2000, x0=0.1))
    assert est.h_hat >= est.g_hat**2


def test_grid_bias_shrinks_with_dt(sol13):
    # close to zero the missed-ruin bias dominates the sampling noise
    x0 = 0.01
    g = sol13.G(x0)
    bias = []
    for dt in (1e-2, 1e-3, 1e-4):
        est = estimate_moments(sol13, SimConfig(dt=dt, n_paths=20_000, t_max=2.5, seed=5, x0=x0,
                                                tail="randomized"))
        bias.append((est.g_hat - g, est.se_g))
    assert bias[0][0] > bias[1][0] > bias[2][0] > 0
    assert bias[0][0] - bias[1][0] > 6 * math.hypot(bias[0][1], bias[1][1])
    assert bias[1][0] - bias[2][0] > 6 * math.hypot(bias[1][1], bias[2][1])


def test_bridge_removes_boundary_bias(sol13):
    x0 = 0.01
    for dt in (1e-2, 1e-3):
        est = estimate_moments(sol13, SimConfig(dt=dt, n_paths=20_000, t_max=2.5, seed=6, x0=x0,
                                                tail="randomized", bridge=True))
        assert abs(est.g_hat - sol13.G(x0)) < 4 * est.se_g


def test_frontier(sol13):
    cfg = SimConfig(dt=1e-2, n_paths=500, t_max=2.5, seed=4, x0=sol13.x_tilde, tail="randomized")
    fr = estimate_mv_frontier(P, [sol13.x_tilde], cfg)
    est = estimate_moments(sol13, cfg)
    row = fr.rows[0]
    assert row.g_hat == est.g_hat and row.var_hat == est.var_hat
    assert row.j_hat == pytest.approx(est.g_hat - 0.065 * est.var_hat, rel=1e-15)
    with pytest.raises(ValueError):
        estimate_mv_frontier(P, [0.0], cfg)


def test_frontier_risk_neutral_peaks_near_taksar():
    p = P.with_(gamma=0.0)
    xt = solve_equilibrium(p).solution.x_tilde
    betas = xt * np.linspace(0.5, 1.5, 11)
    cfg = SimConfig(dt=1e-3, n_paths=2000, t_max=2.5, seed=8, x0=xt, tail="randomized")
    fr = estimate_mv_frontier(p, betas, cfg)
    assert abs(fr.rows.index(fr.best()) - 5) <= 1
    assert all(r.j_hat == r.g_hat for r in fr.rows)


def test_estimate_serializes(sol13):
    est = estimate_moments(sol13, SimConfig(dt=1e-2, n_paths=50, t_max=1.0, x0=0.1,
                                            tail="randomized"))
    d = est.to_dict()
    assert d["config"]["seed"] == 0 and d["params"]["gamma"] == 0.13
    assert {"g_hat", "h_hat", "v_hat", "se_g", "se_h", "truncated_fraction"} <= d.keys()


def test_arbitrary_barrier_strategy():
    sol = build_solution(P, 0.2)
    est = estimate_moments(sol, SimConfig(dt=1e-3, n_paths=4000, t_max=2.5, seed=2, x0=0.1,
                                          tail="randomized", bridge=True))
    assert abs(est.g_hat - sol.G(0.1)) < 4 * est.se_g
    assert abs(est.h_hat - sol.H(0.1)) < 4 * est.se_h
