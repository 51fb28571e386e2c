import time

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from mvdividend import (
    ModelParams,
    MultipleRoots,
    NoRoot,
    RegimeMismatch,
    f,
    find_all_roots,
    solve_barrier,
    taksar_barrier,
)
from mvdividend.barrier import f_limit


def f_mp(x, a, b, rho, gamma, dps=60):
    """Barrier function from the unfactored exponentials at extended precision."""
    with mp.workdps(dps):
        a, b, rho, g, x = (mp.mpf(v) for v in (a, b, rho, gamma, x))
        s12 = mp.sqrt(a * a + 2 * rho * b * b)
        s34 = mp.sqrt(a * a + 4 * rho * b * b)
        r1, r2 = (-a + s12) / b**2, (-a - s12) / b**2
        r3, r4 = (-a + s34) / b**2, (-a - s34) / b**2
        e1, e2, e3, e4 = (mp.exp(r * x) for r in (r1, r2, r3, r4))
        d12 = r1 * e1 - r2 * e2
        d34 = r3 * e3 - r4 * e4
        R12 = (r1**2 * e1 - r2**2 * e2) / d12
        R34 = (r3**2 * e3 - r4**2 * e4) / d34
        return R12 + g * (1 + (e1 - e2) / d12 * (R12 - R34))


P = ModelParams(1.0, 0.25, 0.2)


@pytest.mark.parametrize("gamma", [0.0, 0.05, 0.13, 0.15, 5.0, 40.0])
def test_f_matches_extended_precision(gamma):
    p = P.with_(gamma=gamma)
    xs = [1e-6, 1e-3, 0.05, 0.3, 1.0, 3.0]
    got = f(np.array(xs), p)
    for x, g in zip(xs, got):
        want = float(f_mp(x, p.a, p.b, p.rho, gamma))
        assert g == pytest.approx(want, rel=1e-11, abs=1e-11)


def test_f_endpoints_and_overflow():
    for gamma in (0.0, 0.13, 40.0):
        p = P.with_(gamma=gamma)
        assert f(0.0, p) == gamma - 32.0
        big = f(np.array([50.0, 1e4, 1e300]), p)
        assert np.all(np.isfinite(big))
        assert big[1] == pytest.approx(f_limit(p), rel=1e-13)
    with pytest.raises(ValueError):
        f(-1e-9, P)


def test_f_scalar_and_array_types():
    assert isinstance(f(0.3, P), float)
    assert f(np.linspace(0, 1, 7), P).shape == (7,)


def test_taksar_closed_form():
    with mp.workdps(40):
        a, b, rho = mp.mpf(1), mp.mpf("0.25"), mp.mpf("0.2")
        r1 = (-a + mp.sqrt(a * a + 2 * rho * b * b)) / b**2
        r2 = (-a - mp.sqrt(a * a + 2 * rho * b * b)) / b**2
        want = mp.log(r2**2 / r1**2) / (r1 - r2)
    assert taksar_barrier(P) == pytest.approx(float(want), rel=1e-14)
    assert taksar_barrier(P) == pytest.approx(0.3140707, abs=1e-7)
    # the gamma = 0 root of f is the same barrier
    assert solve_barrier(P).x_tilde == pytest.approx(taksar_barrier(P), abs=1e-12)


@pytest.mark.parametrize("gamma,expected", [(1e-8, 0.31407074), (0.13, 0.323197045),
                                            (0.15, 0.324384402)])
def test_unique_roots(gamma, expected):
    p = P.with_(gamma=gamma)
    sol = solve_barrier(p)
    ref = brentq(lambda x: float(f_mp(x, 1, 0.25, 0.2, gamma, dps=30)), 0.2, 0.5, xtol=1e-15)
    assert sol.x_tilde == pytest.approx(ref, abs=1e-12)
    assert sol.x_tilde == pytest.approx(expected, abs=1e-9)
    lo, hi = sol.bracket
    assert lo <= sol.x_tilde <= hi
    assert sol.residual <= 1e-10
    assert f(lo, p) <= 0 <= f(hi, p)


def test_two_roots_above_pay_all_threshold():
    roots = find_all_roots(P.with_(gamma=40.0), x_max=2.0)
    assert [r.x_tilde for r in roots] == pytest.approx([0.0624039, 0.4222189], abs=1e-6)


def test_solver_failures():
    with pytest.raises(RegimeMismatch):
        solve_barrier(P.with_(gamma=40.0))
    with pytest.raises(NoRoot):
        solve_barrier(P.with_(gamma=0.13), x_max=0.1)
    # close to the pay-all threshold with a large volatility, f changes sign three times
    with pytest.raises(MultipleRoots) as err:
        solve_barrier(ModelParams(1.0, 1.3, 0.17, gamma=0.99 * 2 / 1.3**2))
    assert [r.x_tilde for r in err.value.roots] == pytest.approx([0.0612921, 0.6023099, 3.5531052],
                                                                 abs=1e-6)
    # at the anchor, a single root persists right up to the threshold
    assert solve_barrier(P.with_(gamma=31.9)).x_tilde == pytest.approx(0.42007, abs=1e-5)


def test_barrier_increases_with_gamma_and_decreases_with_rho():
    xs = [solve_barrier(P.with_(gamma=g)).x_tilde for g in np.linspace(0, 0.14, 15)]
    assert np.all(np.diff(xs) > 0)
    xs = [solve_barrier(P.with_(gamma=0.1, rho=r)).x_tilde for r in np.linspace(0.05, 0.5, 10)]
    assert np.all(np.diff(xs) < 0)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.2, 5), b=st.floats(0.05, 1.0), rho=st.floats(0.01, 1.0),
       frac=st.floats(0.0, 0.002))
def test_small_gamma_root_is_unique_and_bracketed(a, b, rho, frac):
    p = ModelParams(a, b, rho, gamma=frac * 2 * a / b**2)
    sol = solve_barrier(p)
    lo, hi = sol.bracket
    assert lo <= sol.x_tilde <= hi
    assert abs(f(sol.x_tilde, p)) <= 1e-10 or hi - lo <= 4 * np.spacing(sol.x_tilde)
    assert f(lo, p) <= 0 <= f(hi, p)


def test_solve_is_fast():
    t = time.perf_counter()
    solve_barrier(P.with_(gamma=0.13))
    assert time.perf_counter() - t < 1.0
