"""Deterministic CSV and JSON writers.

Every file starts with '#' metadata lines (artifact version, scenario name and
the sha256 of version plus canonical config); floats use repr-exact '.17g'.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TRAJECTORY_COLUMNS = ("t", "re_f0", "im_f0", "prob", "norm")
SPECTRUM_COLUMNS = ("delta", "re_c", "im_c", "prob_density")
PROFILE_COLUMNS = ("t", "re_phi", "im_phi", "intensity")
VARIANCE_COLUMNS = ("t", "r", "theta", "variance")


def fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"  # folds -0.0
    return format(x, ".17g")


def header_lines(meta: dict) -> list[str]:
    return [f"# {k}: {meta[k]}" for k in meta]


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[float]], meta: dict) -> Path:
    lines = header_lines(meta)
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path: Path) -> tuple[dict, list[str], np.ndarray]:
    """(metadata, column names, data) of a file written by :func:`write_csv`."""
    meta, cols, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    data = np.array(rows, float).reshape(-1, len(cols or ()))
    return meta, cols or [], data


def trajectory_rows(traj):
    return zip(traj.times, traj.f0.real, traj.f0.imag, traj.prob, traj.norm)


def spectrum_rows(grid, amps):
    amps = np.asarray(amps)
    dens = (amps.real**2 + amps.imag**2) / grid.spacing
    return zip(grid.detunings, amps.real, amps.imag, dens)


def profile_rows(env):
    v = env.values
    return zip(env.times, v.real, v.imag, v.real**2 + v.imag**2)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return 0.0 if x == 0.0 else x
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, payload: dict, meta: dict) -> Path:
    doc = {"meta": meta, **_clean(payload)}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    return path
