"""Particle-to-continuum coarse graining and discrete L2 comparison.

Particle snapshots are binned into the half-open cells of a uniform grid:
cell density is mass per cell area, cell velocity is the mass-weighted mean
and cell spin the inertia-weighted mean.  Empty cells are marked explicitly
(zero density, NaN means) and excluded from discrepancy metrics, with their
count reported so the metric stays honest.

Continuum nodal fields are reduced to the same cells by averaging the four
corner nodes of each cell (periodic wrap), which keeps the comparison metric
simple and symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FloesimError, ParameterError
from .hydro import GridFields
from .particle import ParticleSystem


class ComparisonError(FloesimError):
    """No overlapping support between the two fields being compared."""


@dataclass
class CellFields:
    """Cell-averaged particle fields on an ``nx`` by ``ny`` grid.

    ``count`` marks occupancy; velocity and spin are NaN in empty cells.
    ``sum(rho * cell_area)`` equals the snapshot's total floe mass exactly.
    """

    nx: int
    ny: int
    cell_area: float
    rho: np.ndarray
    u: np.ndarray
    spin: np.ndarray
    count: np.ndarray
    t: float = 0.0

    @property
    def occupied(self) -> np.ndarray:
        return self.count > 0

    def total_mass(self) -> float:
        return float(np.sum(self.rho)) * self.cell_area


def bin_arrays(
    positions: np.ndarray,
    mass: np.ndarray,
    inertia: np.ndarray,
    velocity: np.ndarray,
    spin: np.ndarray,
    domain,
    nx: int,
    ny: int,
    t: float = 0.0,
) -> CellFields:
    """Bin raw per-floe arrays into uniform grid cells.

    Cells are half-open boxes indexed by the wrapped positions; accumulation
    runs in ascending floe index, so the result is deterministic.
    """
    if nx < 1 or ny < 1:
        raise ParameterError("cell grid dimensions must be at least 1")
    lo = np.asarray(domain.lower)
    lengths = domain.lengths
    wx, wy = lengths[0] / nx, lengths[1] / ny
    wrapped = domain.wrap(positions)
    ix = np.clip(np.floor((wrapped[:, 0] - lo[0]) / wx).astype(np.intp), 0, nx - 1)
    iy = np.clip(np.floor((wrapped[:, 1] - lo[1]) / wy).astype(np.intp), 0, ny - 1)
    flat = ix * ny + iy
    n_cells = nx * ny

    count = np.bincount(flat, minlength=n_cells)
    cell_mass = np.bincount(flat, weights=mass, minlength=n_cells)
    mom_x = np.bincount(flat, weights=mass * velocity[:, 0], minlength=n_cells)
    mom_y = np.bincount(flat, weights=mass * velocity[:, 1], minlength=n_cells)
    cell_inertia = np.bincount(flat, weights=inertia, minlength=n_cells)
    spin_mom = np.bincount(flat, weights=inertia * spin, minlength=n_cells)

    occupied = count > 0
    u = np.full((n_cells, 2), np.nan)
    np.divide(mom_x, cell_mass, out=u[:, 0], where=occupied)
    np.divide(mom_y, cell_mass, out=u[:, 1], where=occupied)
    cell_spin = np.full(n_cells, np.nan)
    np.divide(spin_mom, cell_inertia, out=cell_spin, where=occupied)

    area = wx * wy
    return CellFields(
        nx=nx,
        ny=ny,
        cell_area=area,
        rho=(cell_mass / area).reshape(nx, ny),
        u=u.reshape(nx, ny, 2),
        spin=cell_spin.reshape(nx, ny),
        count=count.reshape(nx, ny),
        t=t,
    )


def bin_particles(system: ParticleSystem, nx: int, ny: int | None = None) -> CellFields:
    """Bin a particle snapshot into uniform grid cells."""
    if ny is None:
        ny = nx
    return bin_arrays(
        positions=system.x,
        mass=system.mass,
        inertia=system.inertia,
        velocity=system.v,
        spin=system.omega,
        domain=system.domain,
        nx=nx,
        ny=ny,
        t=system.time,
    )


def nodes_to_cells(nodal: np.ndarray) -> np.ndarray:
    """Average the four corner nodes of each cell (periodic wrap)."""
    return 0.25 * (
        nodal
        + np.roll(nodal, -1, axis=0)
        + np.roll(nodal, -1, axis=1)
        + np.roll(np.roll(nodal, -1, axis=0), -1, axis=1)
    )


@dataclass(frozen=True)
class DiscrepancyResult:
    """Discrete L2 distance between particle cells and continuum cells."""

    quantity: str
    absolute: float
    relative: float
    empty_cells: int
    normalized: bool = False

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "absolute": self.absolute,
            "relative": self.relative,
            "empty_cells": self.empty_cells,
            "normalized": self.normalized,
        }


def l2_discrepancy(
    cells: CellFields,
    fields: GridFields,
    quantity: str,
    normalize: bool = False,
    rho_floor: float = 1e-10,
) -> DiscrepancyResult:
    """Discrete L2 discrepancy over occupied cells.

    ``absolute = sqrt(sum |a - b|^2 |K|)`` and ``relative`` divides by the
    continuum norm over the same support; when that norm vanishes the
    relative value is NaN (division guard) and only the absolute is
    meaningful.  ``normalize`` divides both density fields by their domain
    means first (used for the scaled-density comparison).
    """
    if quantity not in ("rho", "u", "omega_bar"):
        raise ParameterError(f"unknown comparison quantity {quantity!r}")
    if (cells.nx, cells.ny) != (fields.grid.nx, fields.grid.ny):
        raise ParameterError(
            f"grid mismatch: cells {(cells.nx, cells.ny)} vs fields "
            f"{(fields.grid.nx, fields.grid.ny)}"
        )
    occ = cells.occupied
    empty = int(np.sum(~occ))
    if not occ.any():
        raise ComparisonError("all cells are empty; discrepancy undefined")

    if quantity == "rho":
        a = cells.rho
        b = nodes_to_cells(fields.rho)
        if normalize:
            a_mean = float(np.mean(a))
            b_mean = float(np.mean(b))
            if a_mean == 0.0 or b_mean == 0.0:
                raise ComparisonError("cannot normalize a zero-mean density")
            a = a / a_mean
            b = b / b_mean
        diff2 = (a - b) ** 2
        norm2 = b**2
    elif quantity == "u":
        a = cells.u
        b = nodes_to_cells(fields.velocity(rho_floor))
        diff2 = np.sum((a - b) ** 2, axis=-1)
        norm2 = np.sum(b**2, axis=-1)
    else:
        a = cells.spin
        b = nodes_to_cells(fields.mean_spin(rho_floor))
        diff2 = (a - b) ** 2
        norm2 = b**2

    area = cells.cell_area
    absolute = float(np.sqrt(np.sum(diff2[occ]) * area))
    denom = float(np.sqrt(np.sum(norm2[occ]) * area))
    relative = absolute / denom if denom > 0.0 else float("nan")
    return DiscrepancyResult(
        quantity=quantity,
        absolute=absolute,
        relative=relative,
        empty_cells=empty,
        normalized=normalize and quantity == "rho",
    )
