"""Text, JSON and graymap serialization of grids and tube profiles.

Floats are written with the shortest decimal string that round-trips
(``repr``), with a trailing ``.0`` dropped, so files are stable across
platforms and re-read bitwise.
"""
from __future__ import annotations

import json

import numpy as np

from .density import DensityGrid, GridNorm
from .errors import EmptyProfile
from .lyapunov import TubeProfile

__all__ = ["fmt", "emit_grid", "read_grid", "emit_pgm", "emit_profile", "read_profile",
           "PROFILE_COLUMNS", "GRID_HEADER"]

GRID_HEADER = "# x_min x_max y_min y_max nx ny"
PROFILE_COLUMNS = ("t", "x", "y", "sigma", "lambda1", "lambda2", "nx_eigvec", "ny_eigvec")


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _write(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def emit_grid(grid: DensityGrid, path, format: str = "csv") -> None:
    """Write ``grid`` as CSV (comment header, then ``ny`` rows of ``nx``) or JSON."""
    if format == "csv":
        dims = " ".join(fmt(v) for v in (*grid.extent, grid.nx, grid.ny))
        rows = "\n".join(",".join(fmt(v) for v in row) for row in grid.values)
        _write(path, f"{GRID_HEADER}\n# {dims}\n{rows}\n")
    elif format == "json":
        doc = {
            "extent": [float(v) for v in grid.extent],
            "nx": grid.nx,
            "ny": grid.ny,
            "norm": grid.norm.value,
            "values": [float(v) for v in grid.values.ravel()],
        }
        _write(path, json.dumps(doc) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def read_grid(path) -> DensityGrid:
    """Inverse of :func:`emit_grid` (format inferred from the content)."""
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        nx, ny = doc["nx"], doc["ny"]
        values = np.array(doc["values"], dtype=float).reshape(ny, nx)
        return DensityGrid(*doc["extent"], nx, ny, values, GridNorm(doc.get("norm", "unnormalized")))
    lines = text.splitlines()
    if lines[0] != GRID_HEADER:
        raise ValueError(f"{path}: not a grid file")
    dims = lines[1].lstrip("# ").split()
    x0, x1, y0, y1 = (float(v) for v in dims[:4])
    nx, ny = int(dims[4]), int(dims[5])
    values = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:2 + ny]])
    return DensityGrid(x0, x1, y0, y1, nx, ny, values.reshape(ny, nx))


def emit_pgm(grid: DensityGrid, path) -> None:
    """8-bit binary graymap, top row at ``y_max``; the maximum maps to 255."""
    top = grid.values.max()
    scaled = grid.values / top if top > 0 else np.zeros_like(grid.values)
    pixels = np.round(255.0 * scaled[::-1]).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.nx} {grid.ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _profile_columns(profile):
    return np.column_stack([profile.times, profile.states, profile.sigmas, profile.eigvals,
                            profile.eigvecs[:, :, 0]])


def emit_profile(profile: TubeProfile, path, format: str = "csv") -> None:
    """Write one row per tube sample: t, x, y, sigma, lambda1, lambda2 and the
    transverse eigenvector components."""
    if profile is None or len(profile) == 0:
        raise EmptyProfile("refusing to write an empty tube profile")
    cols = _profile_columns(profile)
    if format == "csv":
        rows = "\n".join(",".join(fmt(v) for v in row) for row in cols)
        _write(path, "# " + ",".join(PROFILE_COLUMNS) + "\n" + rows + "\n")
    elif format == "json":
        doc = {name: [float(v) for v in cols[:, k]] for k, name in enumerate(PROFILE_COLUMNS)}
        doc["period"] = float(profile.cycle.period)
        _write(path, json.dumps(doc) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def read_profile(path) -> dict:
    """Columns of a profile CSV or JSON file as arrays keyed by name."""
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return {name: np.array(doc[name]) for name in PROFILE_COLUMNS}
    lines = text.splitlines()
    names = lines[0].lstrip("# ").split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return {name: data[:, k] for k, name in enumerate(names)}
