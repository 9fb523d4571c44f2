"""
Covariance transport along orbits.

A local Gaussian ``exp(-z^T Q^{-1} z / 2)`` around a moving point evolves
under the time-dependent Lyapunov equation

    Q' = A Q + Q A^T + Delta,        Delta = diag(2D, 2D),

with ``A`` the variation matrix on the orbit.  The adjoint (backward)
equation ``Q' = Delta - A Q - Q A^T`` is the same problem on the time
reversed flow.

Eigenvalues reported as ``Lambda`` are those of ``Q^{-1} / 2``, so the tube
width is ``sigma = sqrt(1 / (2 Lambda_1))`` and equals the standard deviation
across the tube.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .dynamics import SystemSpec, field, jacobian
from .errors import NonFinite, NonPositiveRate, NotConverged, SingularJacobian
from .integrate import CycleInfo, JacobianPath, _check_origin, time_grid

__all__ = [
    "NoiseSpec",
    "CovariancePath",
    "TubeProfile",
    "as_matrix",
    "forward_step",
    "adjoint_step",
    "evolve_forward",
    "evolve_adjoint",
    "closed_form_solution",
    "tube_profile",
    "delta_p_min",
    "zaslavsky_time",
    "ou_stationary_variance",
    "diffusive_variance",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic additive noise of amplitude ``two_d`` (the "2D" of the model)."""

    two_d: float

    def __post_init__(self):
        if not self.two_d >= 0:
            raise ValueError("noise amplitude must be non-negative")

    @property
    def D(self) -> float:
        return 0.5 * self.two_d

    @property
    def tensor(self) -> np.ndarray:
        return self.two_d * np.eye(2)


@dataclass(frozen=True)
class CovariancePath:
    """Samples of a joint state/covariance integration.

    ``q`` holds the independent entries ``(q11, q12, q22)`` per sample.
    """

    times: np.ndarray
    states: np.ndarray
    q: np.ndarray

    def matrices(self) -> np.ndarray:
        return as_matrix(self.q)

    @property
    def final(self) -> np.ndarray:
        return as_matrix(self.q[-1])


@dataclass(frozen=True)
class TubeProfile:
    """Tube geometry over the final period of a Lyapunov run.

    ``eigvals[:, 0]`` is the transverse eigenvalue of ``Q^{-1}/2`` and
    ``eigvals[:, 1]`` the tangent one; ``eigvecs[:, :, k]`` are the matching
    unit eigenvectors.
    """

    times: np.ndarray
    states: np.ndarray
    sigmas: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    q: np.ndarray
    cycle: CycleInfo
    noise: NoiseSpec

    def __len__(self):
        return len(self.times)

    @property
    def transverse_variance(self) -> np.ndarray:
        return self.sigmas ** 2

    @property
    def lambda1(self) -> np.ndarray:
        return self.eigvals[:, 0]

    @property
    def lambda2(self) -> np.ndarray:
        return self.eigvals[:, 1]


def as_matrix(q) -> np.ndarray:
    """Symmetric matrices from ``(q11, q12, q22)`` triples (any leading shape)."""
    q = np.asarray(q, dtype=float)
    out = np.empty(q.shape[:-1] + (2, 2))
    out[..., 0, 0] = q[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = q[..., 1]
    out[..., 1, 1] = q[..., 2]
    return out


def _as_triple(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.shape == (3,):
        return Q.copy()
    return np.array([Q[0, 0], 0.5 * (Q[0, 1] + Q[1, 0]), Q[1, 1]])


def forward_step(Q, A, noise: NoiseSpec, dt: float) -> np.ndarray:
    """One step of the discrete covariance map ``Delta dt + M Q M^T``, ``M = 1 + A dt``."""
    M = np.eye(2) + np.asarray(A, dtype=float) * dt
    out = noise.tensor * dt + M @ as_matrix(_as_triple(Q)) @ M.T
    return 0.5 * (out + out.T)


def adjoint_step(Q, A, noise: NoiseSpec, dt: float) -> np.ndarray:
    """Backward map ``M^{-1} (Q + Delta dt) M^{-T}``, ``M = 1 + A dt``."""
    M = np.eye(2) + np.asarray(A, dtype=float) * dt
    Minv = np.linalg.inv(M)
    out = Minv @ (as_matrix(_as_triple(Q)) + noise.tensor * dt) @ Minv.T
    return 0.5 * (out + out.T)


@nb.njit(cache=True)
def _lyap_rhs(kind, p, d, sign, x, y, q11, q12, q22):
    # sign = -1: adjoint equation on the reversed orbit
    vx, vy = field(kind, p, x, y)
    a11, a12, a21, a22 = jacobian(kind, p, x, y)
    a11, a12, a21, a22 = sign * a11, sign * a12, sign * a21, sign * a22
    return (sign * vx, sign * vy,
            2.0 * (a11 * q11 + a12 * q12) + d,
            a11 * q12 + a12 * q22 + a21 * q11 + a22 * q12,
            2.0 * (a21 * q12 + a22 * q22) + d)


@nb.njit(cache=True)
def _lyap_kernel(kind, p, d, sign, x0, y0, q0, hs, xs, qs):
    """Joint RK4 of state and covariance; returns first bad index or -1."""
    x, y = x0, y0
    q11, q12, q22 = q0[0], q0[1], q0[2]
    xs[0, 0], xs[0, 1] = x, y
    qs[0, 0], qs[0, 1], qs[0, 2] = q11, q12, q22
    for i in range(hs.shape[0]):
        h = hs[i]
        k1 = _lyap_rhs(kind, p, d, sign, x, y, q11, q12, q22)
        k2 = _lyap_rhs(kind, p, d, sign, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1],
                       q11 + 0.5 * h * k1[2], q12 + 0.5 * h * k1[3], q22 + 0.5 * h * k1[4])
        k3 = _lyap_rhs(kind, p, d, sign, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1],
                       q11 + 0.5 * h * k2[2], q12 + 0.5 * h * k2[3], q22 + 0.5 * h * k2[4])
        k4 = _lyap_rhs(kind, p, d, sign, x + h * k3[0], y + h * k3[1],
                       q11 + h * k3[2], q12 + h * k3[3], q22 + h * k3[4])
        c = h / 6.0
        x += c * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += c * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        q11 += c * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        q12 += c * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        q22 += c * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(q11)
                and math.isfinite(q12) and math.isfinite(q22)):
            return i + 1
        xs[i + 1, 0], xs[i + 1, 1] = x, y
        qs[i + 1, 0], qs[i + 1, 1], qs[i + 1, 2] = q11, q12, q22
    return -1


def _evolve(spec, s0, Q0, noise, hs, sign=1.0):
    x0, y0 = np.asarray(s0, dtype=float).reshape(2)
    n = len(hs) + 1
    xs = np.empty((n, 2))
    qs = np.empty((n, 3))
    bad = _lyap_kernel(int(spec.kind), spec.params(), noise.two_d, sign, x0, y0,
                       _as_triple(Q0), hs, xs, qs)
    _check_origin(spec, xs, bad)
    if bad >= 0:
        raise NonFinite(f"state or covariance became non-finite at step {bad}")
    return xs, qs


def evolve_forward(spec: SystemSpec, s0, Q0, noise: NoiseSpec, t0: float, t1: float,
                   dt: float = 1e-3) -> CovariancePath:
    """Integrate the orbit and the forward Lyapunov equation jointly (RK4).

    ``Q0`` may be a 2x2 matrix or a ``(q11, q12, q22)`` triple.
    """
    times = time_grid(t0, t1, dt)
    xs, qs = _evolve(spec, s0, Q0, noise, np.diff(times))
    return CovariancePath(times, xs, qs)


def evolve_adjoint(spec: SystemSpec, s0, Q0, noise: NoiseSpec, t0: float, t1: float,
                   dt: float = 1e-3) -> CovariancePath:
    """Integrate the adjoint Lyapunov equation ``Q' = Delta - A Q - Q A^T``.

    The state follows the time-reversed flow ``x' = -v(x)``, and ``A`` is the
    variation matrix of ``spec`` on that reversed orbit.
    """
    times = time_grid(t0, t1, dt)
    xs, qs = _evolve(spec, s0, Q0, noise, np.diff(times), sign=-1.0)
    return CovariancePath(times, xs, qs)


def closed_form_solution(jpath: JacobianPath, Q0, noise: NoiseSpec) -> np.ndarray:
    """Covariance at the final time from the Jacobian path.

    Evaluates ``J Q0 J^T + int J(t,s) Delta J(t,s)^T ds`` with
    ``J(t,s) = J(t,t0) J(s,t0)^{-1}`` and the trapezoidal rule on the path grid.

    Raises
    ------
    SingularJacobian
        If ``det J(s, t0)`` drops below 1e-300 at any node.
    """
    J = np.asarray(jpath.jacobians, dtype=float)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(np.abs(det) < 1e-300):
        raise SingularJacobian("Jacobian determinant underflowed; shorten the horizon")
    Jt = J[-1]
    K = Jt @ np.linalg.inv(J)
    integrand = noise.two_d * (K @ np.swapaxes(K, 1, 2))
    h = np.diff(jpath.times)
    w = np.zeros(len(jpath.times))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    Q = Jt @ as_matrix(_as_triple(Q0)) @ Jt.T + np.tensordot(w, integrand, axes=1)
    return 0.5 * (Q + Q.T)


def _tube_geometry(spec, states, q):
    kind, p = int(spec.kind), spec.params()
    v = np.array([field(kind, p, x, y) for x, y in states])
    normal = np.column_stack([-v[:, 1], v[:, 0]])
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    w, U = np.linalg.eigh(as_matrix(q))
    overlap = np.abs(np.einsum("nij,ni->nj", U, normal))
    trans = np.argmax(overlap, axis=1)
    idx = np.arange(len(q))
    order = np.column_stack([trans, 1 - trans])
    qvals = w[idx[:, None], order]
    vecs = U[idx[:, None, None], np.arange(2)[None, :, None], order[:, None, :]]
    with np.errstate(divide="ignore"):
        lam = 1.0 / (2.0 * qvals)
    sigma = np.sqrt(np.clip(qvals[:, 0], 0.0, None))
    return sigma, lam, vecs


def tube_profile(spec: SystemSpec, cycle: CycleInfo, noise: NoiseSpec, n_periods: int = 10,
                 dt: float | None = None, tol_periodic: float = 0.01) -> TubeProfile:
    """Steady tube around ``cycle`` from the forward Lyapunov equation.

    Starts at the cycle anchor with ``Q0 = 0``, integrates ``n_periods``
    periods on the cycle's own time grid and keeps the last one.  The
    transverse eigenpair is the one whose eigenvector overlaps most with the
    local velocity normal.

    Raises
    ------
    NotConverged
        If the width on the final period differs from the previous period by
        more than ``tol_periodic`` (relative, pointwise).
    """
    if n_periods < 2:
        raise ValueError("n_periods must be at least 2")
    if dt is None or dt == cycle.samples.dt:
        times = cycle.samples.times
    else:
        times = time_grid(0.0, cycle.period, dt)
    hs = np.diff(times)
    xs, qs = cycle.anchor, np.zeros((1, 3))
    for _ in range(n_periods):
        before = qs
        xs, qs = _evolve(spec, xs[-1] if xs.ndim == 2 else xs, qs[-1], noise, hs)
    sigma, lam, vecs = _tube_geometry(spec, xs, qs)
    sigma_before, _, _ = _tube_geometry(spec, xs, before)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.max(np.abs(sigma / sigma_before - 1.0))
    if not dev <= tol_periodic:
        raise NotConverged(f"tube width changed by {dev:.3%} over the last period")
    return TubeProfile(times.copy(), xs, sigma, lam, vecs, qs, cycle, noise)


def delta_p_min(lyap: float, diffusion: float) -> float:
    """Minimal contracting-direction scale ``sqrt(D / (2 lambda))``."""
    if not lyap > 0:
        raise NonPositiveRate(f"contraction rate must be positive, got {lyap}")
    if diffusion < 0:
        raise ValueError("diffusion must be non-negative")
    return math.sqrt(diffusion / (2.0 * lyap))


def zaslavsky_time(lyap: float, action: float, hbar: float) -> float:
    """Log time scale ``ln(action / hbar) / lambda``; negative if action < hbar."""
    if not lyap > 0:
        raise NonPositiveRate(f"Lyapunov exponent must be positive, got {lyap}")
    if not (action > 0 and hbar > 0):
        raise ValueError("action and hbar must be positive")
    return math.log(action / hbar) / lyap


def ou_stationary_variance(lyap: float, diffusion: float) -> float:
    """Stationary variance ``D / lambda`` of ``dp = -lambda p dt + sqrt(2D) dW``."""
    if not lyap > 0:
        raise NonPositiveRate(f"contraction rate must be positive, got {lyap}")
    return diffusion / lyap


def diffusive_variance(var0: float, diffusion: float, t: float) -> float:
    """Variance ``var0 + 2 D t`` of free diffusion after time ``t``."""
    return var0 + 2.0 * diffusion * t
