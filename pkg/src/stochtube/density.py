"""
Stationary densities on rectangular grids.

``values`` is stored with shape ``(ny, nx)``: row ``i`` is the ``i``-th cell
in ``y``, column ``j`` the ``j``-th in ``x``.  Cell centers sit half a cell
inside the extent.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numba as nb
import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree
from scipy.special import ndtr

from .errors import ExtentTooSmall, GridMismatch
from .lyapunov import TubeProfile

__all__ = [
    "GridNorm",
    "DensityGrid",
    "tube_extent",
    "assemble_tube_density",
    "analytic_circle_density",
    "empirical_density",
    "compare",
    "angular_ripple",
]

MAX_OUTSIDE = 1e-3


class GridNorm(enum.Enum):
    UNNORMALIZED = "unnormalized"
    UNIT_MASS = "unit_mass"


@dataclass(frozen=True)
class DensityGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    values: np.ndarray
    norm: GridNorm = GridNorm.UNNORMALIZED

    def __post_init__(self):
        if self.values.shape != (self.ny, self.nx):
            raise ValueError(f"values must have shape ({self.ny}, {self.nx})")

    @property
    def extent(self) -> tuple:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def normalized(self) -> "DensityGrid":
        return replace(self, values=self.values / self.mass(), norm=GridNorm.UNIT_MASS)


def _empty(extent, nx, ny):
    x0, x1, y0, y1 = (float(v) for v in extent)
    if not (x1 > x0 and y1 > y0 and nx > 0 and ny > 0):
        raise ValueError("invalid grid extent or resolution")
    return DensityGrid(x0, x1, y0, y1, int(nx), int(ny), np.zeros((ny, nx)))


def _cell_centers(grid):
    return np.meshgrid(grid.x_centers, grid.y_centers)


def tube_extent(profile: TubeProfile, pad_sigmas: float = 6.0) -> tuple:
    """Bounding box of the cycle padded by ``pad_sigmas`` times the widest sigma."""
    pad = pad_sigmas * float(profile.sigmas.max())
    lo = profile.states.min(axis=0) - pad
    hi = profile.states.max(axis=0) + pad
    return (lo[0], hi[0], lo[1], hi[1])


def _frame(profile):
    states = profile.states[:-1]
    # central differences along the closed cycle
    step = np.roll(states, -1, axis=0) - np.roll(states, 1, axis=0)
    tangent = step / np.linalg.norm(step, axis=1, keepdims=True)
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    return states, tangent, normal


def _subsample(m, n_samples):
    n = m if n_samples is None else min(int(n_samples), m)
    return np.unique(np.round(np.linspace(0, m, n, endpoint=False)).astype(int))


def _normal_line_density(profile, grid, n_samples):
    states, tangent, normal = _frame(profile)
    sigma = profile.sigmas[:-1]
    dt = np.diff(profile.times)
    arc = np.linalg.norm(np.diff(profile.states, axis=0), axis=1)
    time_per_arc = dt / arc
    idx = _subsample(len(states), n_samples)
    states, normal, sigma, time_per_arc = states[idx], normal[idx], sigma[idx], time_per_arc[idx]
    dt = np.diff(np.append(profile.times[idx], profile.times[-1]))

    X, Y = _cell_centers(grid)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    _, j = cKDTree(states).query(pts)
    off = np.einsum("ij,ij->i", pts - states[j], normal[j])
    vals = time_per_arc[j] * np.exp(-0.5 * (off / sigma[j]) ** 2) / (math.sqrt(2 * math.pi) * sigma[j])

    # mass of each normal-line Gaussian beyond the box, along its own line
    lo = np.array([grid.x_min, grid.y_min])
    hi = np.array([grid.x_max, grid.y_max])
    with np.errstate(divide="ignore"):
        reach = []
        for sgn in (1.0, -1.0):
            d = sgn * normal
            t_hi = np.where(d > 0, (hi - states) / d, np.where(d < 0, (lo - states) / d, np.inf))
            reach.append(np.min(t_hi, axis=1))
    outside = ndtr(-reach[0] / sigma) + ndtr(-reach[1] / sigma)
    frac = float(np.sum(outside * dt) / np.sum(dt))
    return vals.reshape(grid.ny, grid.nx), frac


@nb.njit(cache=True)
def _splat(values, x_min, y_min, dx, dy, cx, cy, c11, c12, c22, w, half):
    """Add Gaussian kernels to ``values``; return mass that fell off-grid."""
    ny, nx = values.shape
    lost = 0.0
    total = 0.0
    for k in range(cx.shape[0]):
        det = c11[k] * c22[k] - c12[k] * c12[k]
        i11, i12, i22 = c22[k] / det, -c12[k] / det, c11[k] / det
        norm = w[k] / (2.0 * math.pi * math.sqrt(det)) * dx * dy
        i0 = int(math.floor((cx[k] - half[k] - x_min) / dx))
        i1 = int(math.ceil((cx[k] + half[k] - x_min) / dx))
        j0 = int(math.floor((cy[k] - half[k] - y_min) / dy))
        j1 = int(math.ceil((cy[k] + half[k] - y_min) / dy))
        kin = 0.0
        kall = 0.0
        for jj in range(j0, j1 + 1):
            ry = y_min + (jj + 0.5) * dy - cy[k]
            for ii in range(i0, i1 + 1):
                rx = x_min + (ii + 0.5) * dx - cx[k]
                g = norm * math.exp(-0.5 * (i11 * rx * rx + 2.0 * i12 * rx * ry + i22 * ry * ry))
                kall += g
                if 0 <= ii < nx and 0 <= jj < ny:
                    values[jj, ii] += g / (dx * dy)
                    kin += g
        total += kall
        lost += kall - kin
    return lost / total


def _kernel_density(profile, grid, n_samples):
    states, _, _ = _frame(profile)
    m = len(states)
    if n_samples is None:
        length = float(np.sum(np.linalg.norm(np.diff(profile.states, axis=0), axis=1)))
        n_samples = max(50, int(length / (2.0 * max(grid.dx, grid.dy))))
    idx = _subsample(m, n_samples)
    centers = states[idx]
    nxt = np.roll(centers, -1, axis=0)
    prv = np.roll(centers, 1, axis=0)
    tangent = nxt - prv
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    h = 0.5 * (np.linalg.norm(nxt - centers, axis=1) + np.linalg.norm(centers - prv, axis=1))
    s2 = profile.sigmas[idx] ** 2
    cov = (s2[:, None, None] * np.einsum("ni,nj->nij", normal, normal)
           + (h ** 2)[:, None, None] * np.einsum("ni,nj->nij", tangent, tangent))
    t = profile.times[:-1]
    period = profile.times[-1] - profile.times[0]
    w = np.diff(np.append(t[idx], t[0] + period))
    half = 6.0 * np.sqrt(np.maximum(s2, h ** 2))
    values = np.zeros((grid.ny, grid.nx))
    frac = _splat(values, grid.x_min, grid.y_min, grid.dx, grid.dy,
                  centers[:, 0].copy(), centers[:, 1].copy(),
                  cov[:, 0, 0].copy(), cov[:, 0, 1].copy(), cov[:, 1, 1].copy(), w, half)
    return values, frac


def assemble_tube_density(profile: TubeProfile, extent=None, nx: int = 400, ny: int = 400,
                          method: str = "normal", n_samples: int | None = None) -> DensityGrid:
    """Piece the Lyapunov tube into a unit-mass density on a grid.

    Every cycle sample carries weight proportional to its time step, so slow
    segments weigh more.  Two constructions are available:

    ``"normal"``
        Each grid cell takes the Gaussian of its nearest cycle sample,
        evaluated at the cell's offset along that sample's normal.  The
        field follows the curvature of the cycle; finite sampling shows up
        as faint lines where the nearest sample changes.
    ``"kernel"``
        A sum of 2-D Gaussians centered on ``n_samples`` cycle points, with
        the tube variance across and the local inter-kernel spacing along
        the cycle.  Straight kernels on a curved cycle spread the mass like
        ``1/r`` on the outside of a bend.

    ``n_samples`` thins the cycle samples used (evenly in time); by default
    ``"normal"`` uses all of them and ``"kernel"`` spaces kernels about two
    cells apart.

    Raises
    ------
    ExtentTooSmall
        If more than 0.1% of the mass falls outside the grid.
    """
    if len(profile) < 51:
        raise ValueError("profile needs at least 50 samples over the period")
    grid = _empty(tube_extent(profile) if extent is None else extent, nx, ny)
    if method == "normal":
        values, frac = _normal_line_density(profile, grid, n_samples)
    elif method == "kernel":
        values, frac = _kernel_density(profile, grid, n_samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    if frac > MAX_OUTSIDE:
        raise ExtentTooSmall(f"{frac:.2%} of the tube mass lies outside the grid")
    return replace(grid, values=values).normalized()


def analytic_circle_density(lam: float, r_c: float, D: float, extent=(-2, 2, -2, 2),
                            nx: int = 400, ny: int = 400) -> DensityGrid:
    """Radial Gaussian ``exp(-lam (r - r_c)^2 / (2 D))`` around a circle at the origin.

    Raises
    ------
    ExtentTooSmall
        If more than 0.1% of the planar mass lies outside the grid.
    """
    if not (lam > 0 and D > 0):
        raise ValueError("lam and D must be positive")
    grid = _empty(extent, nx, ny)
    X, Y = _cell_centers(grid)
    values = np.exp(-lam * (np.hypot(X, Y) - r_c) ** 2 / (2.0 * D))
    sd = math.sqrt(D / lam)
    total = quad(lambda r: 2 * math.pi * r * math.exp(-lam * (r - r_c) ** 2 / (2 * D)),
                 0.0, r_c + 40 * sd, points=[r_c], limit=200)[0]
    inside = values.sum() * grid.cell_area
    if inside < (1.0 - MAX_OUTSIDE) * total:
        raise ExtentTooSmall(f"{1 - inside / total:.2%} of the analytic mass lies outside the grid")
    return replace(grid, values=values).normalized()


def empirical_density(samples, extent, nx: int = 200, ny: int = 200) -> DensityGrid:
    """Unit-mass 2-D histogram of ``samples`` (intended for >= 1e5 points)."""
    grid = _empty(extent, nx, ny)
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    counts, _, _ = np.histogram2d(samples[:, 1], samples[:, 0], bins=(ny, nx),
                                  range=((grid.y_min, grid.y_max), (grid.x_min, grid.x_max)))
    return replace(grid, values=counts).normalized()


def compare(a: DensityGrid, b: DensityGrid) -> dict:
    """L1 distance, L2 error relative to ``b`` and max absolute difference."""
    if a.extent != b.extent or (a.nx, a.ny) != (b.nx, b.ny):
        raise GridMismatch(f"grids differ: {a.extent} {a.nx}x{a.ny} vs {b.extent} {b.nx}x{b.ny}")
    diff = a.values - b.values
    return {
        "l1": float(np.abs(diff).sum() * a.cell_area),
        "l2_rel": float(np.linalg.norm(diff) / np.linalg.norm(b.values)),
        "max_abs": float(np.abs(diff).max()),
    }


def angular_ripple(grid: DensityGrid, radius: float, center=(0.0, 0.0),
                   n_angles: int = 720) -> float:
    """Max relative deviation from the angular mean on a circle (bilinear)."""
    interp = RegularGridInterpolator((grid.y_centers, grid.x_centers), grid.values)
    theta = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    vals = interp(np.column_stack([center[1] + radius * np.sin(theta),
                                   center[0] + radius * np.cos(theta)]))
    mean = vals.mean()
    return float(np.max(np.abs(vals - mean)) / mean)
