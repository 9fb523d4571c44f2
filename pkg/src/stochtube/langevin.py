"""
Euler-Maruyama ensembles of the noisy flows.

Each trajectory obeys ``dx = v(x) dt + sqrt(2D) dW`` with isotropic noise and
is advanced as ``x <- x + v(x) dt + sqrt(2D dt) eta``.  The normals of step
``n`` of trajectory ``k`` are a pure function of ``(seed, k, n)`` (see
:mod:`stochtube.rng`), so the result does not depend on how trajectories are
batched or spread across threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numba as nb
import numpy as np
from scipy.spatial import cKDTree

from .dynamics import SystemKind, SystemSpec, field
from .errors import EmptyBin, NonFinite
from .integrate import CycleInfo
from .lyapunov import NoiseSpec, TubeProfile
from .rng import normal_pair

__all__ = [
    "EnsembleConfig",
    "EnsembleStats",
    "SectionStats",
    "simulate_ensemble",
    "section_statistics",
    "binned_tube_variance",
]

MAX_RETAINED = 10_000_000
_BATCH = 256


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble parameters.

    ``starts`` is a single initial state or an ``(m, 2)`` array whose rows are
    assigned to trajectories cyclically.  ``burn_in`` defaults to a third of
    ``t_end``; ``thin`` defaults to the smallest stride keeping at most
    ``MAX_RETAINED`` samples.
    """

    spec: SystemSpec
    noise: NoiseSpec
    n_traj: int
    t_end: float
    dt: float = 1e-3
    burn_in: float | None = None
    seed: int = 0
    starts: object = None
    thin: int | None = None

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.resolved_burn_in < self.t_end:
            raise ValueError("need 0 <= burn_in < t_end")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.n_steps >= 2 ** 32:
            raise ValueError("at most 2**32 - 1 steps per trajectory")

    @property
    def resolved_burn_in(self) -> float:
        return self.t_end / 3.0 if self.burn_in is None else self.burn_in

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.resolved_burn_in / self.dt))

    @property
    def resolved_thin(self) -> int:
        if self.thin is not None:
            return int(self.thin)
        kept = self.n_traj * (self.n_steps - self.burn_steps)
        return max(1, math.ceil(kept / MAX_RETAINED))

    @property
    def n_keep(self) -> int:
        return (self.n_steps - self.burn_steps) // self.resolved_thin

    def start_states(self) -> np.ndarray:
        if self.starts is None:
            s = np.array([[self.spec.r_c, 0.0]] if self.spec.kind == SystemKind.HOPF
                         else [[0.1, 0.0]])
        else:
            s = np.atleast_2d(np.asarray(self.starts, dtype=float))
        return s[np.arange(self.n_traj) % len(s)]


@dataclass(frozen=True)
class SectionStats:
    """Transverse statistics per arc section of a reference cycle.

    ``first`` holds the index of the first cycle sample of every section.
    """

    first: np.ndarray
    counts: np.ndarray
    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class EnsembleStats:
    samples: np.ndarray
    n_traj: int
    n_keep: int
    radial_variance: float | None = None
    radial_variance_se: float | None = None
    section_stats: SectionStats | None = dc_field(default=None)


@nb.njit(cache=True, nogil=True)
def _em_batch(kind, p, amp, dt, seed, traj0, xs, n_steps, burn, thin, out):
    """Euler-Maruyama for rows of ``xs`` (trajectories ``traj0 + i``).

    Steps are numbered from 1; step ``k`` consumes the normal pair at
    counter ``k - 1`` and is stored when ``k > burn`` and
    ``(k - burn) % thin == 0``.  Returns the first diverging row or -1.
    """
    for i in range(xs.shape[0]):
        x, y = xs[i, 0], xs[i, 1]
        traj = traj0 + i
        for k in range(1, n_steps + 1):
            vx, vy = field(kind, p, x, y)
            ex, ey = normal_pair(seed, traj, k - 1)
            x = x + vx * dt + amp * ex
            y = y + vy * dt + amp * ey
            if k > burn and (k - burn) % thin == 0:
                slot = (k - burn) // thin - 1
                if slot < out.shape[1]:
                    out[i, slot, 0] = x
                    out[i, slot, 1] = y
            if not (math.isfinite(x) and math.isfinite(y)):
                return i
        xs[i, 0], xs[i, 1] = x, y
    return -1


def _run_batch(cfg: EnsembleConfig, lo: int, hi: int, starts: np.ndarray) -> np.ndarray:
    xs = starts[lo:hi].copy()
    out = np.empty((hi - lo, cfg.n_keep, 2))
    bad = _em_batch(int(cfg.spec.kind), cfg.spec.params(), math.sqrt(cfg.noise.two_d * cfg.dt),
                    cfg.dt, np.uint64(cfg.seed), np.uint64(lo), xs, cfg.n_steps,
                    cfg.burn_steps, cfg.resolved_thin, out)
    if bad >= 0:
        raise NonFinite(f"trajectory {lo + bad} diverged")
    return out


def _workers(requested):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("STOCHTUBE_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def simulate_ensemble(cfg: EnsembleConfig, cycle: CycleInfo | None = None,
                      n_sections: int = 64, workers: int | None = None) -> EnsembleStats:
    """Run the Euler-Maruyama ensemble described by ``cfg``.

    Samples after the burn-in are kept every ``thin`` steps and returned in
    trajectory order, so output is bitwise identical for any ``workers``.
    For the Hopf circle the variance of ``r - r_c`` and its standard error
    (from per-trajectory variances) are reported; when ``cycle`` is given,
    :func:`section_statistics` is applied as well.

    Raises
    ------
    NonFinite
        If any trajectory diverges; the message names its index.
    """
    starts = cfg.start_states()
    bounds = [(lo, min(lo + _BATCH, cfg.n_traj)) for lo in range(0, cfg.n_traj, _BATCH)]
    n_workers = min(_workers(workers), len(bounds))
    if n_workers == 1:
        parts = [_run_batch(cfg, lo, hi, starts) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            parts = list(pool.map(lambda b: _run_batch(cfg, b[0], b[1], starts), bounds))
    per_traj = np.concatenate(parts, axis=0)
    samples = per_traj.reshape(-1, 2)

    rv = rv_se = None
    if cfg.spec.kind == SystemKind.HOPF and cfg.n_keep > 0:
        dev = np.hypot(per_traj[..., 0], per_traj[..., 1]) - cfg.spec.r_c
        rv = float(np.var(dev))
        if cfg.n_traj > 1:
            rv_se = float(np.std(np.var(dev, axis=1), ddof=1) / math.sqrt(cfg.n_traj))
    sections = section_statistics(samples, cycle, n_sections) if cycle is not None else None
    return EnsembleStats(samples, cfg.n_traj, cfg.n_keep, rv, rv_se, sections)


def _cycle_frame(cycle: CycleInfo):
    pts = cycle.samples.states[:-1]
    normals = cycle.normals()[:-1]
    return pts, normals


def section_statistics(samples, cycle: CycleInfo, n_sections: int = 64,
                       min_count: int = 100) -> SectionStats:
    """Mean and variance of the transverse deviation per cycle section.

    Each sample is attached to its nearest cycle sample; its deviation is
    projected on that point's unit normal.  Cycle samples are split into
    ``n_sections`` consecutive arcs of equal duration.

    Raises
    ------
    EmptyBin
        If a section collects fewer than ``min_count`` samples.
    """
    if n_sections < 4:
        raise ValueError("n_sections must be at least 4")
    pts, normals = _cycle_frame(cycle)
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    _, j = cKDTree(pts).query(samples)
    dev = np.einsum("ij,ij->i", samples - pts[j], normals[j])
    section = j * n_sections // len(pts)
    counts = np.bincount(section, minlength=n_sections)
    if counts.min() < min_count:
        raise EmptyBin(f"section {int(np.argmin(counts))} has only {counts.min()} samples")
    mean = np.bincount(section, weights=dev, minlength=n_sections) / counts
    sq = np.bincount(section, weights=(dev - mean[section]) ** 2, minlength=n_sections)
    first = (np.arange(n_sections) * len(pts) + n_sections - 1) // n_sections
    return SectionStats(first, counts, mean, sq / counts)


def binned_tube_variance(profile: TubeProfile, n_sections: int) -> np.ndarray:
    """Tube transverse variance averaged over the same sections as above."""
    var = profile.transverse_variance[:-1]
    section = np.arange(len(var)) * n_sections // len(var)
    return np.bincount(section, weights=var, minlength=n_sections) / np.bincount(section)
