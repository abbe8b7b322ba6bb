"""Artifact serialization: run CSVs, manifests and comparison reports.

All floating-point values are printed with 17 significant digits so a
written file round-trips bit-exactly through ``float()``; line endings are
pinned to ``\\n`` so identical runs produce identical bytes on any platform.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .coarsegrain import CellFields
from .diagnostics import MomentRecord
from .hydro import GridFields
from .particle import ParticleSystem

FLOE_COLUMNS = "t,id,x,y,x_unwrapped,y_unwrapped,vx,vy,theta,omega,r,h,m".split(",")
MOMENT_COLUMNS = "t,M0,M1vx,M1vy,M1w,M2x,M2v,M2w,M2,Dn,Dt,Pdrag_lin,Pdrag_rot".split(",")
FIELD_COLUMNS = "t,node_i,node_j,x,y,rho,ux,uy,omega_bar".split(",")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_floes_csv(path: Path, snapshots: list[tuple[float, ParticleSystem]]) -> None:
    """One row per floe per snapshot time."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(FLOE_COLUMNS)
        for t, system in snapshots:
            for i in range(system.n):
                w.writerow(
                    [fmt(t), str(i)]
                    + [
                        fmt(v)
                        for v in (
                            system.x[i, 0],
                            system.x[i, 1],
                            system.x_unwrapped[i, 0],
                            system.x_unwrapped[i, 1],
                            system.v[i, 0],
                            system.v[i, 1],
                            system.theta[i],
                            system.omega[i],
                            system.radius[i],
                            system.thickness[i],
                            system.mass[i],
                        )
                    ]
                )


def write_moments_csv(path: Path, records: list[MomentRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(MOMENT_COLUMNS)
        for r in records:
            w.writerow(
                [
                    fmt(v)
                    for v in (
                        r.t,
                        r.total_mass,
                        r.momentum[0],
                        r.momentum[1],
                        r.angular_momentum,
                        r.strain_energy,
                        r.kinetic_translational,
                        r.kinetic_rotational,
                        r.total_energy,
                        r.dissipation_normal,
                        r.dissipation_tangential,
                        r.power_drag_linear,
                        r.power_drag_rotational,
                    )
                ]
            )


def write_fields_csv(
    path: Path, snapshots: list[tuple[float, GridFields]], rho_floor: float = 1e-10
) -> None:
    """Nodal continuum fields, row-major over (node_i, node_j)."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(FIELD_COLUMNS)
        for t, fields in snapshots:
            pos = fields.grid.node_positions()
            u = fields.velocity(rho_floor)
            spin = fields.mean_spin(rho_floor)
            for i in range(fields.grid.nx):
                for j in range(fields.grid.ny):
                    w.writerow(
                        [fmt(t), str(i), str(j)]
                        + [
                            fmt(v)
                            for v in (
                                pos[i, j, 0],
                                pos[i, j, 1],
                                fields.rho[i, j],
                                u[i, j, 0],
                                u[i, j, 1],
                                spin[i, j],
                            )
                        ]
                    )


def write_cells_csv(path: Path, snapshots: list[tuple[float, CellFields]], domain) -> None:
    """Coarse-grained particle cell fields; mirrors the nodal field schema.

    Coordinates are cell centers; empty cells carry zero density and NaN
    velocity/spin.
    """
    lo = np.asarray(domain.lower)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(FIELD_COLUMNS)
        for t, cells in snapshots:
            wx = domain.lengths[0] / cells.nx
            wy = domain.lengths[1] / cells.ny
            for i in range(cells.nx):
                for j in range(cells.ny):
                    w.writerow(
                        [fmt(t), str(i), str(j)]
                        + [
                            fmt(v)
                            for v in (
                                lo[0] + (i + 0.5) * wx,
                                lo[1] + (j + 0.5) * wy,
                                cells.rho[i, j],
                                cells.u[i, j, 0],
                                cells.u[i, j, 1],
                                cells.spin[i, j],
                            )
                        ]
                    )


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(path: Path, payload: dict) -> None:
    """Strict JSON (non-finite floats become null)."""
    with open(path, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_floes_csv(path: Path) -> dict[float, dict[str, np.ndarray]]:
    """Snapshots keyed by time; each value maps column name to an array."""
    times: dict[float, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FLOE_COLUMNS:
            raise ValueError(f"unexpected floe CSV header {reader.fieldnames}")
        for row in reader:
            t = float(row["t"])
            bucket = times.setdefault(t, {c: [] for c in FLOE_COLUMNS[1:]})
            for c in FLOE_COLUMNS[1:]:
                bucket[c].append(float(row[c]))
    return {
        t: {c: np.asarray(vals) for c, vals in bucket.items()} for t, bucket in times.items()
    }


def read_fields_csv(path: Path) -> dict[float, dict[str, np.ndarray]]:
    """Nodal field snapshots keyed by time; arrays reshaped to (nx, ny)."""
    times: dict[float, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FIELD_COLUMNS:
            raise ValueError(f"unexpected field CSV header {reader.fieldnames}")
        for row in reader:
            t = float(row["t"])
            bucket = times.setdefault(t, {c: [] for c in FIELD_COLUMNS[1:]})
            for c in FIELD_COLUMNS[1:]:
                bucket[c].append(float(row[c]))
    out = {}
    for t, bucket in times.items():
        ni = np.asarray(bucket["node_i"], dtype=int)
        nj = np.asarray(bucket["node_j"], dtype=int)
        nx, ny = int(ni.max()) + 1, int(nj.max()) + 1
        snap = {"nx": nx, "ny": ny}
        for c in ("x", "y", "rho", "ux", "uy", "omega_bar"):
            arr = np.empty((nx, ny))
            arr[ni, nj] = np.asarray(bucket[c])
            snap[c] = arr
        out[t] = snap
    return out
