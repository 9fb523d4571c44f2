"""
Planar benchmark flows
======================

Three vector fields with attracting limit cycles:

* ``HOPF``: circular cycle of radius ``r_c``,
  ``x' = lam (r_c - r) x - omega y``, ``y' = lam (r_c - r) y + omega x``.
* ``VAN_DER_POL``: ``x' = y``, ``y' = -mu (x^2 - b) y - omega0^2 x``.
* ``RAYLEIGH`` (position and velocity swapped):
  ``x' = y - mu (x^3/3 - b x)``, ``y' = -omega0^2 x``.

``LINEAR`` is a constant-coefficient field ``x' = M x``; it exists so that
the covariance integrators can be checked against closed-form solutions.

Every field has an analytic variation matrix ``A = dv/dx``.  A spec can be
flipped to its time-reversed counterpart ``-v`` with :meth:`SystemSpec.reversed`.

The numba kernels :func:`field` and :func:`jacobian` take an integer kind and a
flat parameter vector (see :meth:`SystemSpec.params`) so the compiled
integrators in the other modules can call them without Python objects.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from .errors import OriginSingularity

__all__ = [
    "SystemKind",
    "SystemSpec",
    "velocity",
    "variation_matrix",
    "reversed_velocity",
    "field",
    "jacobian",
]


class SystemKind(enum.IntEnum):
    HOPF = 0
    VAN_DER_POL = 1
    RAYLEIGH = 2
    LINEAR = 3


# indices into the flat parameter vector
P_LAM, P_RC, P_OMEGA, P_MU, P_B, P_OMEGA0 = 0, 1, 2, 3, 4, 5
P_M11, P_M12, P_M21, P_M22, P_DIR = 6, 7, 8, 9, 10
N_PARAMS = 11


@dataclass(frozen=True)
class SystemSpec:
    """Parameterized planar vector field.

    Use the constructors :meth:`hopf`, :meth:`van_der_pol`, :meth:`rayleigh`
    and :meth:`linear` rather than filling fields by hand.  ``direction`` is
    +1 for the physical flow and -1 for its time reversal.
    """

    kind: SystemKind
    lam: float = 1.0
    r_c: float = 1.0
    omega: float = 1.0
    mu: float = 0.0
    b: float = 3.0
    omega0: float = 1.0
    matrix: tuple = (0.0, 0.0, 0.0, 0.0)
    direction: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SystemKind(self.kind))
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.kind == SystemKind.HOPF:
            if not (self.lam > 0 and self.r_c > 0 and self.omega != 0):
                raise ValueError("Hopf circle needs lam > 0, r_c > 0, omega != 0")
        elif self.kind in (SystemKind.VAN_DER_POL, SystemKind.RAYLEIGH):
            if not (self.mu > 0 and self.b > 0 and self.omega0 > 0):
                raise ValueError("oscillators need mu > 0, b > 0, omega0 > 0")
        else:
            m = tuple(float(v) for v in np.ravel(self.matrix))
            if len(m) != 4:
                raise ValueError("linear field needs a 2x2 matrix")
            object.__setattr__(self, "matrix", m)

    @classmethod
    def hopf(cls, lam=1.0, r_c=1.0, omega=1.0):
        return cls(SystemKind.HOPF, lam=lam, r_c=r_c, omega=omega)

    @classmethod
    def van_der_pol(cls, mu, b=3.0, omega0=1.0):
        return cls(SystemKind.VAN_DER_POL, mu=mu, b=b, omega0=omega0)

    @classmethod
    def rayleigh(cls, mu, b=3.0, omega0=1.0):
        return cls(SystemKind.RAYLEIGH, mu=mu, b=b, omega0=omega0)

    @classmethod
    def linear(cls, matrix):
        return cls(SystemKind.LINEAR, matrix=tuple(np.ravel(matrix)))

    def reversed(self) -> "SystemSpec":
        """Spec of the time-reversed flow ``x' = -v(x)``."""
        return replace(self, direction=-self.direction)

    def params(self) -> np.ndarray:
        p = np.zeros(N_PARAMS)
        p[P_LAM], p[P_RC], p[P_OMEGA] = self.lam, self.r_c, self.omega
        p[P_MU], p[P_B], p[P_OMEGA0] = self.mu, self.b, self.omega0
        p[P_M11:P_M22 + 1] = self.matrix
        p[P_DIR] = self.direction
        return p


@nb.njit(cache=True)
def field(kind, p, x, y):
    """Velocity ``(vx, vy)`` of the flow selected by ``kind``."""
    if kind == 0:
        g = p[P_LAM] * (p[P_RC] - math.sqrt(x * x + y * y))
        vx = g * x - p[P_OMEGA] * y
        vy = g * y + p[P_OMEGA] * x
    elif kind == 1:
        vx = y
        vy = -p[P_MU] * (x * x - p[P_B]) * y - p[P_OMEGA0] ** 2 * x
    elif kind == 2:
        vx = y - p[P_MU] * (x * x * x / 3.0 - p[P_B] * x)
        vy = -p[P_OMEGA0] ** 2 * x
    else:
        vx = p[P_M11] * x + p[P_M12] * y
        vy = p[P_M21] * x + p[P_M22] * y
    s = p[P_DIR]
    return s * vx, s * vy


@nb.njit(cache=True)
def jacobian(kind, p, x, y):
    """Variation matrix entries ``(a11, a12, a21, a22)``.

    For the Hopf circle at the origin the entries are NaN; callers check.
    """
    if kind == 0:
        r = math.sqrt(x * x + y * y)
        if r == 0.0:
            return math.nan, math.nan, math.nan, math.nan
        lam = p[P_LAM]
        g = lam * (p[P_RC] - r)
        c = lam / r
        a11 = g - c * x * x
        a12 = -c * x * y - p[P_OMEGA]
        a21 = -c * x * y + p[P_OMEGA]
        a22 = g - c * y * y
    elif kind == 1:
        mu = p[P_MU]
        a11 = 0.0
        a12 = 1.0
        a21 = -2.0 * mu * x * y - p[P_OMEGA0] ** 2
        a22 = -mu * (x * x - p[P_B])
    elif kind == 2:
        a11 = -p[P_MU] * (x * x - p[P_B])
        a12 = 1.0
        a21 = -p[P_OMEGA0] ** 2
        a22 = 0.0
    else:
        a11, a12, a21, a22 = p[P_M11], p[P_M12], p[P_M21], p[P_M22]
    s = p[P_DIR]
    return s * a11, s * a12, s * a21, s * a22


def _xy(s):
    x, y = (float(v) for v in np.asarray(s, dtype=float).reshape(2))
    return x, y


def velocity(spec: SystemSpec, s) -> np.ndarray:
    """Drift of ``spec`` at state ``s`` as a length-2 array."""
    x, y = _xy(s)
    return np.array(field(int(spec.kind), spec.params(), x, y))


def reversed_velocity(spec: SystemSpec, s) -> np.ndarray:
    """Drift of the time-reversed flow, ``-velocity(spec, s)``."""
    return -velocity(spec, s)


def variation_matrix(spec: SystemSpec, s) -> np.ndarray:
    """Analytic 2x2 matrix ``dv/dx`` at ``s``.

    Raises
    ------
    OriginSingularity
        For the Hopf circle at ``(0, 0)``, where ``r`` is not differentiable.
    """
    x, y = _xy(s)
    if spec.kind == SystemKind.HOPF and x == 0.0 and y == 0.0:
        raise OriginSingularity("Hopf variation matrix is singular at the origin")
    return np.array(jacobian(int(spec.kind), spec.params(), x, y)).reshape(2, 2)
