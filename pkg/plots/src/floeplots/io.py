"""Readers for run-directory artifacts.

This package is a pure consumer of the simulator's output files; nothing
here imports the simulator.  All readers validate the CSV header and raise
``SchemaError`` naming the first missing column.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FLOE_COLUMNS = "t,id,x,y,x_unwrapped,y_unwrapped,vx,vy,theta,omega,r,h,m".split(",")
MOMENT_COLUMNS = "t,M0,M1vx,M1vy,M1w,M2x,M2v,M2w,M2,Dn,Dt,Pdrag_lin,Pdrag_rot".split(",")
FIELD_COLUMNS = "t,node_i,node_j,x,y,rho,ux,uy,omega_bar".split(",")


class SchemaError(ValueError):
    """An artifact file is missing or does not match the expected schema."""


def _check_header(fieldnames, expected, path: Path) -> None:
    if fieldnames is None:
        raise SchemaError(f"{path}: empty file")
    for column in expected:
        if column not in fieldnames:
            raise SchemaError(f"{path}: missing column {column!r}")


def _require(path: Path) -> Path:
    if not path.exists():
        raise SchemaError(f"missing artifact {path}")
    return path


def read_manifest(run_dir: Path) -> dict:
    return json.loads(_require(Path(run_dir) / "manifest.json").read_text())


def read_compare(run_dir: Path) -> dict:
    return json.loads(_require(Path(run_dir) / "compare.json").read_text())


def read_floes(run_dir: Path) -> dict[float, dict[str, np.ndarray]]:
    """Floe snapshots keyed by time, columns as arrays."""
    path = _require(Path(run_dir) / "floes.csv")
    times: dict[float, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, FLOE_COLUMNS, path)
        for row in reader:
            t = float(row["t"])
            bucket = times.setdefault(t, {c: [] for c in FLOE_COLUMNS[1:]})
            for c in FLOE_COLUMNS[1:]:
                bucket[c].append(float(row[c]))
    if not times:
        raise SchemaError(f"{path}: no snapshots")
    return {t: {c: np.asarray(v) for c, v in b.items()} for t, b in times.items()}


def read_moments(run_dir: Path) -> dict[str, np.ndarray]:
    path = _require(Path(run_dir) / "moments.csv")
    columns: dict[str, list] = {c: [] for c in MOMENT_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, MOMENT_COLUMNS, path)
        for row in reader:
            for c in MOMENT_COLUMNS:
                columns[c].append(float(row[c]))
    if not columns["t"]:
        raise SchemaError(f"{path}: no samples")
    return {c: np.asarray(v) for c, v in columns.items()}


def read_fields(run_dir: Path, name: str) -> dict[float, dict[str, np.ndarray]]:
    """Nodal/cell field snapshots keyed by time, arrays shaped (nx, ny)."""
    path = _require(Path(run_dir) / name)
    times: dict[float, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, FIELD_COLUMNS, path)
        for row in reader:
            t = float(row["t"])
            bucket = times.setdefault(t, {c: [] for c in FIELD_COLUMNS[1:]})
            for c in FIELD_COLUMNS[1:]:
                bucket[c].append(float(row[c]))
    if not times:
        raise SchemaError(f"{path}: no snapshots")
    out = {}
    for t, bucket in times.items():
        ni = np.asarray(bucket["node_i"], dtype=int)
        nj = np.asarray(bucket["node_j"], dtype=int)
        nx, ny = ni.max() + 1, nj.max() + 1
        snap = {"nx": int(nx), "ny": int(ny)}
        for c in ("x", "y", "rho", "ux", "uy", "omega_bar"):
            arr = np.empty((nx, ny))
            arr[ni, nj] = np.asarray(bucket[c])
            snap[c] = arr
        out[t] = snap
    return out


def ocean_velocity_fn(manifest: dict):
    """Ocean velocity evaluator reconstructed from the manifest config."""
    spec = manifest.get("config", {}).get("ocean", {"type": "constant", "u0": [0.0, 0.0]})
    kind = spec.get("type", "constant")
    if kind == "constant":
        u0 = np.asarray(spec.get("u0", [0.0, 0.0]), dtype=float)

        def constant(x, y):
            return np.full_like(x, u0[0]), np.full_like(y, u0[1])

        return constant
    if kind == "rotational":

        def rotational(x, y):
            q = x**2 + y**2
            s = (q - 4.0) / 32.0 * np.exp(-q * (q - 8.0) / 8.0)
            return -y * s, x * s

        return rotational
    raise SchemaError(f"unknown ocean spec {kind!r} in manifest")


def nearest_time(available, requested: float) -> tuple[float, float]:
    """Nearest available snapshot time and its offset from the request."""
    times = np.asarray(sorted(available), dtype=float)
    idx = int(np.argmin(np.abs(times - requested)))
    return float(times[idx]), float(times[idx] - requested)
