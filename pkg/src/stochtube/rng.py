"""
Counter-based normal variates (Philox4x32-10 + polar method).

A draw is a pure function of ``(seed, trajectory, step)``: the 64-bit seed is
the Philox key and ``(step, trajectory)`` fill the 128-bit counter.  Any
partition of trajectories or steps across workers reproduces the same
numbers, with no generator state to carry around.
"""
import math

import numba as nb
import numpy as np

__all__ = ["philox4x32", "normal_pair", "normals"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5, _S6, _S26 = np.uint64(5), np.uint64(6), np.uint64(26)
_INV52 = 2.0 / 9007199254740992.0


@nb.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all words are uint64 holding 32-bit values."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def normal_pair(seed, traj, step):
    """Two independent standard normals for ``(seed, traj, step)``.

    Marsaglia's polar method; rejected candidates advance an attempt counter
    stored in the second counter word, so ``step`` must stay below 2**32.
    """
    s = np.uint64(seed)
    t = np.uint64(traj)
    n = np.uint64(step) & _MASK
    attempt = np.uint64(0)
    while True:
        r0, r1, r2, r3 = philox4x32(n, attempt, t & _MASK, t >> _S32, s & _MASK, s >> _S32)
        # 53-bit uniforms on (-1, 1)
        u = (np.int64((r0 >> _S5) << _S26 | (r1 >> _S6)) + 0.5) * _INV52 - 1.0
        v = (np.int64((r2 >> _S5) << _S26 | (r3 >> _S6)) + 0.5) * _INV52 - 1.0
        q = u * u + v * v
        if 0.0 < q < 1.0:
            f = math.sqrt(-2.0 * math.log(q) / q)
            return u * f, v * f
        attempt += np.uint64(1)


@nb.njit(cache=True)
def _fill(seed, traj, step0, out):
    for j in range(out.shape[0]):
        out[j, 0], out[j, 1] = normal_pair(seed, traj, step0 + j)


def normals(seed: int, traj: int, n_steps: int, step0: int = 0) -> np.ndarray:
    """The ``(n_steps, 2)`` block of normals a trajectory consumes from ``step0``."""
    out = np.empty((n_steps, 2))
    _fill(np.uint64(seed), np.uint64(traj), np.uint64(step0), out)
    return out
