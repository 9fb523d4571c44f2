"""
Deterministic integration: orbits, variational equation, limit cycles.

All integrators are fixed-step classical RK4.  A run from ``t0`` to ``t1``
takes full steps of ``dt`` and shortens the last one to land on ``t1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .dynamics import SystemKind, SystemSpec, field, jacobian
from .errors import DegenerateStart, NoConvergence, NonFinite, OriginSingularity

__all__ = [
    "Trajectory",
    "JacobianPath",
    "CycleInfo",
    "time_grid",
    "integrate_orbit",
    "integrate_with_jacobian",
    "find_limit_cycle",
]

DEFAULT_DT = 1e-3
DEFAULT_TRANSIENT = 100.0
DEFAULT_TOL_CYCLE = 1e-8


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dt: float

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class JacobianPath:
    times: np.ndarray
    jacobians: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.jacobians[-1]


@dataclass(frozen=True)
class CycleInfo:
    """A detected limit cycle.

    ``samples`` starts at ``anchor`` and covers exactly one period;
    ``section_normal`` is the unit vector normal to the Poincaré section
    (the flow direction at the anchor).
    """

    period: float
    anchor: np.ndarray
    samples: Trajectory
    section_normal: np.ndarray
    spec: SystemSpec | None = None

    def velocities(self) -> np.ndarray:
        """Velocity at every cycle sample, shape ``(n, 2)``."""
        kind, p = int(self.spec.kind), self.spec.params()
        return np.array([field(kind, p, x, y) for x, y in self.samples.states])

    def normals(self) -> np.ndarray:
        """Unit normals (velocity rotated by +90 degrees) at every sample."""
        v = self.velocities()
        n = np.column_stack([-v[:, 1], v[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Sample times ``t0, t0+dt, ..., t1`` with a shortened last step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    n = math.ceil((t1 - t0) / dt - 1e-9)
    times = t0 + dt * np.arange(n + 1, dtype=float)
    times[-1] = t1
    return times


@nb.njit(cache=True)
def _rk4_step(kind, p, x, y, h):
    k1x, k1y = field(kind, p, x, y)
    k2x, k2y = field(kind, p, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k3x, k3y = field(kind, p, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k4x, k4y = field(kind, p, x + h * k3x, y + h * k3y)
    return (x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y))


@nb.njit(cache=True)
def _orbit_kernel(kind, p, x0, y0, hs, out):
    """Fill ``out`` (n+1, 2); return index of first non-finite row or -1."""
    x, y = x0, y0
    out[0, 0], out[0, 1] = x, y
    for i in range(hs.shape[0]):
        x, y = _rk4_step(kind, p, x, y, hs[i])
        if not (math.isfinite(x) and math.isfinite(y)):
            return i + 1
        out[i + 1, 0], out[i + 1, 1] = x, y
    return -1


@nb.njit(cache=True)
def _jac_rhs(kind, p, x, y, j11, j12, j21, j22):
    vx, vy = field(kind, p, x, y)
    a11, a12, a21, a22 = jacobian(kind, p, x, y)
    return (vx, vy,
            a11 * j11 + a12 * j21, a11 * j12 + a12 * j22,
            a21 * j11 + a22 * j21, a21 * j12 + a22 * j22)


@nb.njit(cache=True)
def _jac_kernel(kind, p, x0, y0, hs, xs, js):
    """Joint RK4 of state and Jacobian; returns first bad index or -1."""
    x, y = x0, y0
    j11, j12, j21, j22 = 1.0, 0.0, 0.0, 1.0
    xs[0, 0], xs[0, 1] = x, y
    js[0, 0, 0], js[0, 0, 1], js[0, 1, 0], js[0, 1, 1] = j11, j12, j21, j22
    for i in range(hs.shape[0]):
        h = hs[i]
        k1 = _jac_rhs(kind, p, x, y, j11, j12, j21, j22)
        k2 = _jac_rhs(kind, p, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1],
                      j11 + 0.5 * h * k1[2], j12 + 0.5 * h * k1[3],
                      j21 + 0.5 * h * k1[4], j22 + 0.5 * h * k1[5])
        k3 = _jac_rhs(kind, p, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1],
                      j11 + 0.5 * h * k2[2], j12 + 0.5 * h * k2[3],
                      j21 + 0.5 * h * k2[4], j22 + 0.5 * h * k2[5])
        k4 = _jac_rhs(kind, p, x + h * k3[0], y + h * k3[1],
                      j11 + h * k3[2], j12 + h * k3[3],
                      j21 + h * k3[4], j22 + h * k3[5])
        c = h / 6.0
        x += c * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += c * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        j11 += c * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        j12 += c * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        j21 += c * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
        j22 += c * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5])
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(j11)
                and math.isfinite(j12) and math.isfinite(j21) and math.isfinite(j22)):
            return i + 1
        xs[i + 1, 0], xs[i + 1, 1] = x, y
        js[i + 1, 0, 0], js[i + 1, 0, 1] = j11, j12
        js[i + 1, 1, 0], js[i + 1, 1, 1] = j21, j22
    return -1


def _check_origin(spec, states, bad):
    if spec.kind == SystemKind.HOPF:
        hit = np.flatnonzero((states[: bad if bad >= 0 else None] == 0.0).all(axis=1))
        if hit.size:
            raise OriginSingularity(f"orbit reached the origin at sample {hit[0]}")


def integrate_orbit(spec: SystemSpec, s0, t0: float, t1: float,
                    dt: float = DEFAULT_DT) -> Trajectory:
    """Integrate ``spec`` from ``s0`` over ``[t0, t1]`` with RK4.

    Raises
    ------
    NonFinite
        If the state overflows, which signals an unstable spec/step pair.
    """
    times = time_grid(t0, t1, dt)
    x0, y0 = np.asarray(s0, dtype=float).reshape(2)
    states = np.empty((len(times), 2))
    bad = _orbit_kernel(int(spec.kind), spec.params(), x0, y0, np.diff(times), states)
    if bad >= 0:
        raise NonFinite(f"state became non-finite at t={times[bad]:g}")
    return Trajectory(times, states, dt)


def integrate_with_jacobian(spec: SystemSpec, s0, t0: float, t1: float,
                            dt: float = DEFAULT_DT, reversed: bool = False):
    """Integrate the orbit together with its Jacobian ``J(t, t0)``.

    With ``reversed`` the state follows ``x' = -v(x)`` and the Jacobian
    ``J' = -A(x) J``.  Both advance in the same RK4 stages.

    Returns
    -------
    (Trajectory, JacobianPath)
    """
    if reversed:
        spec = spec.reversed()
    times = time_grid(t0, t1, dt)
    x0, y0 = np.asarray(s0, dtype=float).reshape(2)
    n = len(times)
    states = np.empty((n, 2))
    jacs = np.empty((n, 2, 2))
    bad = _jac_kernel(int(spec.kind), spec.params(), x0, y0, np.diff(times), states, jacs)
    _check_origin(spec, states, bad)
    if bad >= 0:
        raise NonFinite(f"state or Jacobian became non-finite at t={times[bad]:g}")
    return Trajectory(times, states, dt), JacobianPath(times, jacs)


@nb.njit(cache=True)
def _next_crossing(kind, p, x, y, px, py, nx, ny, dt, max_steps):
    """Step from (x, y) until the section ``n.(z - p) = 0`` is crossed upward.

    Returns ``(status, x*, y*, elapsed)``; status 0 on success, 1 when no
    crossing happened within ``max_steps``, 2 on overflow.
    """
    armed = False
    t = 0.0
    for _ in range(max_steps):
        xn, yn = _rk4_step(kind, p, x, y, dt)
        if not (math.isfinite(xn) and math.isfinite(yn)):
            return 2, xn, yn, t
        g_new = nx * (xn - px) + ny * (yn - py)
        if armed and g_new >= 0.0:
            lo, hi = 0.0, dt
            while hi - lo > 1e-10:
                mid = 0.5 * (lo + hi)
                xm, ym = _rk4_step(kind, p, x, y, mid)
                if nx * (xm - px) + ny * (ym - py) >= 0.0:
                    hi = mid
                else:
                    lo = mid
            xc, yc = _rk4_step(kind, p, x, y, hi)
            return 0, xc, yc, t + hi
        if g_new < 0.0:
            armed = True
        x, y = xn, yn
        t += dt
    return 1, x, y, t


def find_limit_cycle(spec: SystemSpec, s0, transient: float = DEFAULT_TRANSIENT,
                     tol_cycle: float = DEFAULT_TOL_CYCLE, dt: float = DEFAULT_DT,
                     max_iter: int = 500, max_period: float = 1e3) -> CycleInfo:
    """Locate the attracting limit cycle reached from ``s0``.

    After a transient of length ``transient`` a Poincaré section is placed
    through the current point, normal to the flow.  Upward crossings are
    localized by bisection on the final RK4 sub-step (to 1e-10 in time)
    until two successive return points are closer than ``tol_cycle``.
    The last return interval is the period.

    Raises
    ------
    DegenerateStart
        If ``s0`` (or the post-transient point) is a fixed point.
    NoConvergence
        If the returns do not settle within ``max_iter`` crossings.
    """
    kind, p = int(spec.kind), spec.params()
    s0 = np.asarray(s0, dtype=float).reshape(2)
    if math.hypot(*field(kind, p, *s0)) < 1e-12:
        raise DegenerateStart(f"start {tuple(s0)} is a fixed point")
    start = integrate_orbit(spec, s0, 0.0, transient, dt).final if transient > 0 else s0
    v = np.array(field(kind, p, *start))
    speed = math.hypot(*v)
    if speed < 1e-12:
        raise DegenerateStart("transient ended on a fixed point")
    normal = v / speed
    max_steps = int(max_period / dt)

    point = start
    for _ in range(max_iter):
        status, xc, yc, elapsed = _next_crossing(kind, p, point[0], point[1],
                                                 start[0], start[1], normal[0], normal[1],
                                                 dt, max_steps)
        if status == 2:
            raise NonFinite("orbit diverged during cycle search")
        if status == 1:
            raise NoConvergence(f"no section return within {max_period:g} time units")
        ret = np.array([xc, yc])
        if math.hypot(*(ret - point)) < tol_cycle:
            samples = integrate_orbit(spec, ret, 0.0, elapsed, dt)
            return CycleInfo(elapsed, ret, samples, normal, spec)
        point = ret
    raise NoConvergence(f"returns did not settle to {tol_cycle:g} in {max_iter} iterations")
