"""Per-path random streams for the Monte Carlo kernels.

Path ``i`` of a run with seed ``s`` draws from a xoshiro256** generator whose
state is derived from ``(s, i)`` alone through splitmix64, so results do not
depend on how paths are scheduled across threads. Normals come from the
Marsaglia-Tsang 128-layer ziggurat.
"""

from __future__ import annotations

import numba as nb
import numpy as np
from numba import float64, int32, int64, uint64

_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0
_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def ziggurat_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the (k, w, f) tables of the 128-layer normal ziggurat."""
    m1 = 2147483648.0
    dn = tn = _ZIG_R
    kn = np.zeros(128, dtype=np.int64)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = _ZIG_V / np.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = np.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = np.sqrt(-2.0 * np.log(_ZIG_V / dn + np.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = np.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


ZIG_K, ZIG_W, ZIG_F = ziggurat_tables()


@nb.njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@nb.njit(inline="always")
def stream_state(seed, index):
    """xoshiro256** state for stream ``index`` of ``seed``."""
    sm = _mix64(uint64(seed) + uint64(_GOLDEN)) ^ _mix64(uint64(index) + uint64(1))
    sm += uint64(_GOLDEN)
    s0 = _mix64(sm)
    sm += uint64(_GOLDEN)
    s1 = _mix64(sm)
    sm += uint64(_GOLDEN)
    s2 = _mix64(sm)
    sm += uint64(_GOLDEN)
    s3 = _mix64(sm)
    return s0, s1, s2, s3


@nb.njit(inline="always")
def next_u64(s0, s1, s2, s3):
    m = s1 * uint64(5)
    r = ((m << uint64(7)) | (m >> uint64(57))) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
    return r, s0, s1, s2, s3


@nb.njit(inline="always")
def to_unit(u):
    """Map 64 random bits to a double in (0, 1)."""
    return (float64(u >> uint64(11)) + 0.5) * _INV_2_53


@nb.njit(inline="never")
def normal_slow(hz, iz, s0, s1, s2, s3, kn, wn, fn):
    """Wedge and tail branches of the ziggurat (taken ~1.2% of the time)."""
    while True:
        x = hz * wn[iz]
        if iz == 0:
            while True:
                u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
                xx = -np.log(to_unit(u)) / _ZIG_R
                u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
                yy = -np.log(to_unit(u))
                if yy + yy >= xx * xx:
                    break
            if hz > 0:
                return _ZIG_R + xx, s0, s1, s2, s3
            return -_ZIG_R - xx, s0, s1, s2, s3
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        if fn[iz] + to_unit(u) * (fn[iz - 1] - fn[iz]) < np.exp(-0.5 * x * x):
            return x, s0, s1, s2, s3
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        hz = int64(int32(u >> uint64(32)))
        iz = int64(u & uint64(127))
        if abs(hz) < kn[iz]:
            return hz * wn[iz], s0, s1, s2, s3


@nb.njit
def normals(seed, index, n, kn, wn, fn):
    """``n`` standard normals from stream ``index`` (used for testing the generator)."""
    s0, s1, s2, s3 = stream_state(seed, index)
    out = np.empty(n)
    for i in range(n):
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        hz = int64(int32(u >> uint64(32)))
        iz = int64(u & uint64(127))
        if abs(hz) < kn[iz]:
            out[i] = hz * wn[iz]
        else:
            out[i], s0, s1, s2, s3 = normal_slow(hz, iz, s0, s1, s2, s3, kn, wn, fn)
    return out


@nb.njit
def uniforms(seed, index, n):
    s0, s1, s2, s3 = stream_state(seed, index)
    out = np.empty(n)
    for i in range(n):
        u, s0, s1, s2, s3 = next_u64(s0, s1, s2, s3)
        out[i] = to_unit(u)
    return out


def standard_normals(seed: int, index: int, n: int) -> np.ndarray:
    return normals(np.uint64(seed), np.uint64(index), n, ZIG_K, ZIG_W, ZIG_F)
