"""
Command-line driver.

    stochtube <task> --config <path> [--set key=value ...] [--out prefix]
                     [--format csv|json] [--image]

The config file is INI (keys in ``[system]``, ``[noise]``, ``[run]`` and the
section named after the task are merged; other task sections are ignored)
or JSON (flat, or nested with the same section names).  ``--set`` overrides
file values.  Every run writes ``<prefix>.resolved.cfg`` with the fully
resolved configuration.

Exit status: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys

import numpy as np

from . import density, io
from .dynamics import SystemSpec
from .errors import ConfigError, StochTubeError
from .integrate import find_limit_cycle
from .langevin import EnsembleConfig, section_statistics, simulate_ensemble
from .lyapunov import NoiseSpec, delta_p_min, tube_profile, zaslavsky_time

TASKS = ("cycle", "tube", "langevin", "density", "compare", "scales")
SYSTEMS = ("hopf", "vdp", "rayleigh")
COMMON_SECTIONS = ("run", "system", "noise")

# key -> (parser, default)
KEYS = {
    "system": (str, "hopf"),
    "lam": (float, 1.0),
    "r_c": (float, 1.0),
    "omega": (float, 1.0),
    "mu": (float, 0.2),
    "b": (float, 3.0),
    "omega0": (float, 1.0),
    "two_d": (float, 0.1),
    "dt": (float, 1e-3),
    "s0_x": (float, 0.1),
    "s0_y": (float, 0.0),
    "transient": (float, 100.0),
    "tol_cycle": (float, 1e-8),
    "n_periods": (int, 10),
    "tol_periodic": (float, 0.01),
    "n_traj": (int, 1000),
    "t_end": (float, 60.0),
    "burn_in": (float, None),
    "thin": (int, None),
    "seed": (int, 0),
    "n_sections": (int, 16),
    "x_min": (float, None),
    "x_max": (float, None),
    "y_min": (float, None),
    "y_max": (float, None),
    "nx": (int, 400),
    "ny": (int, 400),
    "method": (str, "normal"),
    "reference": (str, "analytic"),
    "lyap": (float, 1.0),
    "diffusion": (float, 0.05),
    "action": (float, 1.0),
    "hbar": (float, 1.0),
}


class _IOFailure(Exception):
    pass


def _load_file(path, task):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
        for key, value in doc.items():
            if isinstance(value, dict):
                if key in COMMON_SECTIONS or key == task:
                    raw.update({k: v for k, v in value.items()})
                elif key not in TASKS:
                    raise ConfigError(f"unknown section '{key}'")
            else:
                raw[key] = value
        return raw
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    raw.update(parser.defaults())
    for section in parser.sections():
        if section in COMMON_SECTIONS or section == task:
            raw.update({k: v for k, v in parser.items(section, raw=True)})
        elif section not in TASKS:
            raise ConfigError(f"unknown section '{section}'")
    return raw


def resolve_config(task, path=None, overrides=()):
    """Merge defaults, file values and ``key=value`` overrides into typed values."""
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}'")
    raw = _load_file(path, task) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    raw.pop("task", None)
    cfg = {}
    for key, value in raw.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'")
        kind = KEYS[key][0]
        try:
            cfg[key] = None if value in (None, "", "none") else kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for key '{key}': {value!r}") from exc
    out = {k: d for k, (_, d) in KEYS.items()}
    out.update(cfg)
    if out["system"] not in SYSTEMS:
        raise ConfigError(f"bad value for key 'system': {out['system']!r}")
    if out["method"] not in ("normal", "kernel"):
        raise ConfigError(f"bad value for key 'method': {out['method']!r}")
    if out["reference"] not in ("analytic", "langevin"):
        raise ConfigError(f"bad value for key 'reference': {out['reference']!r}")
    for key in ("dt", "t_end", "tol_cycle", "lyap", "hbar", "action"):
        if not out[key] > 0:
            raise ConfigError(f"bad value for key '{key}': must be positive")
    for key in ("n_traj", "nx", "ny"):
        if out[key] < 1:
            raise ConfigError(f"bad value for key '{key}': must be at least 1")
    if out["n_periods"] < 2:
        raise ConfigError("bad value for key 'n_periods': must be at least 2")
    if out["two_d"] < 0:
        raise ConfigError("bad value for key 'two_d': must be non-negative")
    return out


def build_spec(cfg) -> SystemSpec:
    try:
        if cfg["system"] == "hopf":
            return SystemSpec.hopf(cfg["lam"], cfg["r_c"], cfg["omega"])
        if cfg["system"] == "vdp":
            return SystemSpec.van_der_pol(cfg["mu"], cfg["b"], cfg["omega0"])
        return SystemSpec.rayleigh(cfg["mu"], cfg["b"], cfg["omega0"])
    except ValueError as exc:
        raise ConfigError(f"bad system parameters: {exc}") from exc


def write_resolved(cfg, task, path):
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {"task": task}
    parser["run"].update({k: "none" if v is None else (io.fmt(v) if isinstance(v, (int, float)) else str(v))
                          for k, v in cfg.items()})
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        parser.write(fh)


def _extent(cfg, fallback):
    keys = ("x_min", "x_max", "y_min", "y_max")
    if all(cfg[k] is not None for k in keys):
        return tuple(cfg[k] for k in keys)
    if any(cfg[k] is not None for k in keys):
        raise ConfigError("grid extent needs all of x_min, x_max, y_min, y_max")
    return fallback


def _summary(task, **values):
    return " ".join([f"task={task}"] + [f"{k}={io.fmt(v)}" for k, v in values.items()])


def _cycle(cfg, spec):
    start = (cfg["s0_x"], cfg["s0_y"])
    return find_limit_cycle(spec, start, cfg["transient"], cfg["tol_cycle"], cfg["dt"])


def _tube(cfg, spec):
    cycle = _cycle(cfg, spec)
    noise = NoiseSpec(cfg["two_d"])
    return tube_profile(spec, cycle, noise, cfg["n_periods"], tol_periodic=cfg["tol_periodic"])


def _tube_grid(cfg, profile):
    ext = _extent(cfg, density.tube_extent(profile))
    return density.assemble_tube_density(profile, ext, cfg["nx"], cfg["ny"], method=cfg["method"])


def _ensemble(cfg, spec, cycle=None):
    starts = (cycle.samples.states[np.linspace(0, len(cycle.samples) - 2, cfg["n_traj"]).astype(int)]
              if cycle is not None else None)
    if starts is None and spec.kind != 0:
        starts = (cfg["s0_x"], cfg["s0_y"])
    ens = EnsembleConfig(spec, NoiseSpec(cfg["two_d"]), cfg["n_traj"], cfg["t_end"], cfg["dt"],
                         cfg["burn_in"], cfg["seed"], starts, cfg["thin"])
    return simulate_ensemble(ens)


def _write_csv(path, header, rows):
    body = "\n".join(",".join(io.fmt(v) for v in row) for row in rows)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# {header}\n{body}\n")


def _emit_grid(grid, prefix, fmt, image):
    io.emit_grid(grid, f"{prefix}.grid.{fmt}", fmt)
    if image:
        io.emit_pgm(grid, f"{prefix}.grid.pgm")


def run_task(task, cfg, prefix, fmt="csv", image=False) -> str:
    """Execute one task; return the one-line summary."""
    spec = build_spec(cfg)
    if task == "scales":
        return _summary(task, delta_p_min=delta_p_min(cfg["lyap"], cfg["diffusion"]),
                        t_star=zaslavsky_time(cfg["lyap"], cfg["action"], cfg["hbar"]))
    if task == "cycle":
        cycle = _cycle(cfg, spec)
        traj = cycle.samples
        _write_csv(f"{prefix}.trajectory.csv", "t,x,y",
                   np.column_stack([traj.times, traj.states]))
        return _summary(task, period=cycle.period, anchor_x=cycle.anchor[0],
                        anchor_y=cycle.anchor[1])
    if task == "tube":
        profile = _tube(cfg, spec)
        io.emit_profile(profile, f"{prefix}.profile.{fmt}", fmt)
        return _summary(task, period=profile.cycle.period, lambda1=profile.lambda1[-1],
                        lambda2=profile.lambda2[-1], sigma_min=profile.sigmas.min(),
                        sigma_max=profile.sigmas.max())
    if task == "langevin":
        cycle = None if spec.kind == 0 else _cycle(cfg, spec)
        stats = _ensemble(cfg, spec, cycle)
        _write_csv(f"{prefix}.samples.csv", "x,y", stats.samples)
        if cycle is None:
            return _summary(task, radial_variance=stats.radial_variance,
                            radial_variance_se=stats.radial_variance_se)
        sec = section_statistics(stats.samples, cycle, cfg["n_sections"])
        _write_csv(f"{prefix}.sections.csv", "section,count,mean,variance",
                   np.column_stack([np.arange(len(sec.counts)), sec.counts, sec.mean, sec.variance]))
        return _summary(task, min_variance=sec.variance.min(), max_variance=sec.variance.max())
    if task == "density":
        grid = _tube_grid(cfg, _tube(cfg, spec))
        _emit_grid(grid, prefix, fmt, image)
        return _summary(task, mass=grid.mass(), peak=grid.values.max())
    if task == "compare":
        profile = _tube(cfg, spec)
        grid = _tube_grid(cfg, profile)
        if cfg["reference"] == "analytic":
            if cfg["system"] != "hopf":
                raise ConfigError("bad value for key 'reference': analytic needs system=hopf")
            ref = density.analytic_circle_density(cfg["lam"] * cfg["r_c"], cfg["r_c"],
                                                  cfg["two_d"] / 2, grid.extent, grid.nx, grid.ny)
        else:
            stats = _ensemble(cfg, spec, profile.cycle)
            ref = density.empirical_density(stats.samples, grid.extent, grid.nx, grid.ny)
        _emit_grid(grid, prefix, fmt, image)
        metrics = density.compare(grid, ref)
        _write_csv(f"{prefix}.compare.csv", "l1,l2_rel,max_abs",
                   [[metrics["l1"], metrics["l2_rel"], metrics["max_abs"]]])
        return _summary(task, **metrics)
    raise ConfigError(f"unknown task '{task}'")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stochtube",
                                     description="Lyapunov tubes around noisy limit cycles.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", help="INI or JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration key")
    parser.add_argument("--out", default="stochtube", help="output path prefix")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--image", action="store_true", help="also write a P5 graymap")
    args = parser.parse_args(argv)

    try:
        cfg = resolve_config(args.task, args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        write_resolved(cfg, args.task, f"{args.out}.resolved.cfg")
        line = run_task(args.task, cfg, args.out, args.format, args.image)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StochTubeError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 4
    print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
