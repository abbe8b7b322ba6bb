"""Pipeline execution: particle runs, continuum runs, the two reference
experiments, and CSV-to-CSV comparison.

Every run writes a ``manifest.json`` echoing the full configuration (plus any
preset overrides), the package version and the seed; together these
regenerate the run byte-for-byte.  Output lands under
``<out_root>/<run-id>/`` where the run id is derived from the mode, seed and
a hash of the configuration, so identical configs map to identical paths.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coarsegrain import CellFields, bin_arrays, bin_particles, l2_discrepancy
from .config import SimConfig, apply_overrides, example1_config, example2_config
from .core import Domain, ParameterError
from .diagnostics import MomentRecord, moments
from .hydro import (
    GridFields,
    HydroConfig,
    HydroGrid,
    continuum_drag_from_particles,
    hydro_step,
)
from .output import (
    read_fields_csv,
    read_floes_csv,
    write_cells_csv,
    write_fields_csv,
    write_floes_csv,
    write_json,
    write_moments_csv,
)
from .particle import ParticleSystem, step_euler, total_force_torque
from .config import build_system

DEFAULT_OUT_ENV = "FLOESIM_OUT"


@dataclass
class RunOutput:
    """In-memory results of one particle integration."""

    final_system: ParticleSystem
    moments: list[MomentRecord]
    snapshots: list[tuple[float, ParticleSystem]]
    extremes: dict = field(default_factory=dict)
    max_force_imbalance: float = 0.0


def run_particle_simulation(
    system: ParticleSystem,
    dt: float,
    n_steps: int,
    sample_stride: int = 1,
    snapshot_steps: tuple[int, ...] = (0,),
    mean_field_scaling: bool = True,
    policy: str = "auto",
    track_extremes: bool = False,
    track_force_balance: bool = False,
) -> RunOutput:
    """Integrate ``n_steps`` of forward Euler, recording moments and snapshots.

    Moments are recorded at step 0, every ``sample_stride`` steps, and at the
    final step.  ``track_force_balance`` additionally monitors the relative
    magnitude of the net contact+drag force sum at every step (should sit at
    round-off for drag-free runs).
    """
    extremes: dict | None = {} if track_extremes else None
    snapshot_set = set(snapshot_steps)
    records = [moments(system, mean_field_scaling, policy)]
    snapshots = [(0.0, system)] if 0 in snapshot_set else []
    max_imbalance = 0.0

    for k in range(n_steps):
        forces = total_force_torque(system, mean_field_scaling, policy, extremes)
        if track_force_balance:
            f = forces[0]
            net = np.abs(f.sum(axis=0)).max()
            scale = float(np.abs(f).sum())
            if scale > 0.0:
                max_imbalance = max(max_imbalance, net / scale)
        system = step_euler(system, dt, mean_field_scaling, policy, forces=forces)
        step = k + 1
        system.time = step * dt
        if step % sample_stride == 0 or step == n_steps:
            records.append(moments(system, mean_field_scaling, policy))
        if step in snapshot_set:
            snapshots.append((system.time, system))

    return RunOutput(
        final_system=system,
        moments=records,
        snapshots=snapshots,
        extremes=extremes or {},
        max_force_imbalance=max_imbalance,
    )


def run_hydro_simulation(
    fields: GridFields,
    ocean,
    config: HydroConfig,
    n_steps: int,
    snapshot_steps: tuple[int, ...] = (0,),
) -> list[tuple[float, GridFields]]:
    """Integrate the continuum system, returning the requested snapshots."""
    grid = fields.grid
    nodes = grid.node_positions()
    uo = ocean.velocity(nodes)
    curl = ocean.curl(nodes)
    snapshot_set = set(snapshot_steps)
    snapshots = [(0.0, fields)] if 0 in snapshot_set else []
    for k in range(n_steps):
        fields = hydro_step(fields, ocean, config, grid, ocean_velocity=uo, ocean_curl=curl)
        if (k + 1) in snapshot_set:
            snapshots.append(((k + 1) * config.dt, fields))
    return snapshots


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------

def resolve_out_root(out_root: str | Path | None) -> Path:
    if out_root is not None:
        return Path(out_root)
    return Path(os.environ.get(DEFAULT_OUT_ENV, "runs"))


def run_id_for(cfg: SimConfig, name: str | None = None) -> str:
    digest = hashlib.sha1(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:8]
    return f"{name or cfg.mode}-s{cfg.seed}-{digest}"


def make_run_dir(cfg: SimConfig, out_root, name: str | None = None) -> Path:
    run_dir = resolve_out_root(out_root) / run_id_for(cfg, name)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(run_dir: Path, cfg: SimConfig, overrides: dict | None = None) -> None:
    write_json(
        run_dir / "manifest.json",
        {
            "version": __version__,
            "run_id": run_dir.name,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "overrides": overrides or {},
        },
    )


def particle_summary(out: RunOutput) -> dict:
    """Headline numbers of a particle run (used by the preset reports)."""
    system = out.final_system
    u_ocean = system.ocean.velocity(system.x)
    mismatch = np.hypot(*(system.v - u_ocean).T)
    first, last = out.moments[0], out.moments[-1]
    bursts = 0
    active = False
    for rec in out.moments:
        if rec.strain_peak > 0.0 and not active:
            bursts += 1
            active = True
        elif rec.strain_peak == 0.0:
            active = False
    return {
        "t_final": system.time,
        "mean_speed_mismatch": float(np.mean(mismatch)),
        "mean_abs_spin": float(np.mean(np.abs(system.omega))),
        "mean_spin": float(np.mean(system.omega)),
        "ke_translational": last.kinetic_translational,
        "ke_rotational": last.kinetic_rotational,
        "ke_rotational_initial": first.kinetic_rotational,
        "ke_drift_target": 0.5
        * float(np.sum(system.mass * (u_ocean[:, 0] ** 2 + u_ocean[:, 1] ** 2))),
        "strain_burst_count": bursts,
    }


def run_particle(
    cfg: SimConfig,
    out_root=None,
    overrides_echo: dict | None = None,
    name: str | None = None,
    track_extremes: bool = False,
) -> tuple[Path, RunOutput]:
    """Execute a particle-mode config and write its artifact set."""
    system = build_system(cfg)
    out = run_particle_simulation(
        system,
        dt=cfg.dt,
        n_steps=cfg.n_steps(),
        sample_stride=cfg.sample_stride,
        snapshot_steps=tuple(cfg.snapshot_steps()),
        mean_field_scaling=cfg.mean_field_scaling,
        policy=cfg.neighbor_policy,
        track_extremes=track_extremes,
    )
    run_dir = make_run_dir(cfg, out_root, name)
    write_manifest(run_dir, cfg, overrides_echo)
    write_floes_csv(run_dir / "floes.csv", out.snapshots)
    write_moments_csv(run_dir / "moments.csv", out.moments)
    return run_dir, out


def _hydro_setup(cfg: SimConfig) -> tuple[HydroGrid, GridFields, HydroConfig]:
    domain = cfg.domain_obj()
    hspec = dict(cfg.hydro)
    nx = int(hspec.get("nx", 25))
    ny = int(hspec.get("ny", nx))
    grid = HydroGrid(domain=domain, nx=nx, ny=ny)
    r_floe = float(cfg.population.get("radius", 0.02))
    thickness = cfg.population.get("thickness", {"type": "constant", "value": 1.0})
    if thickness.get("type") != "constant":
        raise ParameterError("the continuum solver needs a constant-thickness population")
    alpha_bar, beta_bar = continuum_drag_from_particles(
        cfg.material_params(),
        r_floe,
        float(thickness.get("value", 1.0)),
        rho_ref=float(hspec.get("rho_ref", 1.0)),
        convention=cfg.drag_convention,
    )
    fields = GridFields.uniform(grid, rho=float(hspec.get("rho0", 1.0)), r_floe=r_floe)
    hydro_cfg = HydroConfig(
        dt=cfg.dt,
        alpha_bar=alpha_bar,
        beta_bar=beta_bar,
        c_art=float(hspec.get("c_art", 0.5)),
        rho_floor=float(hspec.get("rho_floor", 1e-10)),
        cfl_limit=float(hspec.get("cfl_limit", 0.5)),
    )
    return grid, fields, hydro_cfg


def run_hydro(
    cfg: SimConfig,
    out_root=None,
    overrides_echo: dict | None = None,
    name: str | None = None,
) -> tuple[Path, list[tuple[float, GridFields]]]:
    """Execute a hydro-mode config and write its artifact set."""
    _, fields, hydro_cfg = _hydro_setup(cfg)
    snapshots = run_hydro_simulation(
        fields,
        cfg.ocean_field(),
        hydro_cfg,
        n_steps=cfg.n_steps(),
        snapshot_steps=tuple(cfg.snapshot_steps()),
    )
    run_dir = make_run_dir(cfg, out_root, name)
    write_manifest(run_dir, cfg, overrides_echo)
    write_fields_csv(run_dir / "fields.csv", snapshots, hydro_cfg.rho_floor)
    return run_dir, snapshots


def comparison_report(
    cell_snapshots: list[tuple[float, CellFields]],
    field_snapshots: list[tuple[float, GridFields]],
    rho_floor: float = 1e-10,
) -> dict:
    """Per-time discrepancy report for matching snapshot lists."""
    field_by_t = {round(t, 12): f for t, f in field_snapshots}
    comparisons = []
    for t, cells in cell_snapshots:
        fields = field_by_t.get(round(t, 12))
        if fields is None:
            continue
        entry = {"time": t}
        for quantity, normalize in (("rho", True), ("u", False), ("omega_bar", False)):
            res = l2_discrepancy(cells, fields, quantity, normalize=normalize, rho_floor=rho_floor)
            entry[quantity] = res.as_dict()
        comparisons.append(entry)
    if not comparisons:
        raise ParameterError("no common snapshot times to compare")
    return {"comparisons": comparisons}


def run_example1(
    seed: int = 0, overrides: dict | None = None, out_root=None
) -> tuple[Path, RunOutput, dict]:
    """Preset: random floes relaxing onto a constant ocean drift."""
    cfg, echo = apply_overrides(example1_config(seed=seed), overrides)
    run_dir, out = run_particle(cfg, out_root, overrides_echo=echo, name="example1")
    summary = particle_summary(out)
    write_json(run_dir / "summary.json", summary)
    return run_dir, out, summary


def run_example2(
    seed: int = 0,
    overrides: dict | None = None,
    paper_scale: bool = False,
    out_root=None,
) -> tuple[Path, dict]:
    """Preset: particle-vs-continuum consistency under the rotational ocean.

    Runs the lattice particle system and the continuum solver with matched
    drag, coarse-grains the particle snapshots onto the continuum grid, and
    reports discrete L2 discrepancies at the comparison times.
    """
    cfg, echo = apply_overrides(example2_config(seed=seed, paper_scale=paper_scale), overrides)

    system = build_system(cfg)
    out = run_particle_simulation(
        system,
        dt=cfg.dt,
        n_steps=cfg.n_steps(),
        sample_stride=cfg.sample_stride,
        snapshot_steps=tuple(cfg.snapshot_steps()),
        mean_field_scaling=cfg.mean_field_scaling,
        policy=cfg.neighbor_policy,
    )
    grid, fields, hydro_cfg = _hydro_setup(cfg)
    field_snapshots = run_hydro_simulation(
        fields,
        cfg.ocean_field(),
        hydro_cfg,
        n_steps=cfg.n_steps(),
        snapshot_steps=tuple(cfg.snapshot_steps()),
    )
    cell_snapshots = [
        (t, bin_particles(snap, grid.nx, grid.ny)) for t, snap in out.snapshots
    ]
    report = comparison_report(cell_snapshots, field_snapshots, hydro_cfg.rho_floor)

    run_dir = make_run_dir(cfg, out_root, name="example2")
    write_manifest(run_dir, cfg, echo)
    write_floes_csv(run_dir / "floes.csv", out.snapshots)
    write_moments_csv(run_dir / "moments.csv", out.moments)
    write_fields_csv(run_dir / "fields.csv", field_snapshots, hydro_cfg.rho_floor)
    write_cells_csv(run_dir / "cells.csv", cell_snapshots, cfg.domain_obj())
    write_json(run_dir / "compare.json", report)
    summary = {
        "n_floes": system.n,
        "grid": [grid.nx, grid.ny],
        "u_relative_discrepancy": {
            str(entry["time"]): entry["u"]["relative"] for entry in report["comparisons"]
        },
    }
    write_json(run_dir / "summary.json", summary)
    return run_dir, report


def compare_csvs(particle_csv: str | Path, hydro_csv: str | Path) -> dict:
    """Compare a floe snapshot CSV against a continuum field CSV.

    The continuum grid and domain are inferred from the node coordinates;
    particle snapshots are binned onto that grid.  Times present in both
    files are compared.
    """
    floe_snaps = read_floes_csv(Path(particle_csv))
    field_snaps = read_fields_csv(Path(hydro_csv))

    sample = next(iter(field_snaps.values()))
    nx, ny = sample["nx"], sample["ny"]
    hx = sample["x"][1, 0] - sample["x"][0, 0] if nx > 1 else 1.0
    hy = sample["y"][0, 1] - sample["y"][0, 0] if ny > 1 else 1.0
    lower = (float(sample["x"][0, 0]), float(sample["y"][0, 0]))
    domain = Domain(
        lower=lower, upper=(lower[0] + nx * hx, lower[1] + ny * hy), periodic=(True, True)
    )
    grid = HydroGrid(domain=domain, nx=nx, ny=ny)

    cell_snapshots = []
    field_snapshots = []
    for t in sorted(set(floe_snaps) & set(field_snaps)):
        fs = floe_snaps[t]
        cells = bin_arrays(
            positions=np.stack([fs["x"], fs["y"]], axis=1),
            mass=fs["m"],
            inertia=fs["m"] * fs["r"] ** 2,
            velocity=np.stack([fs["vx"], fs["vy"]], axis=1),
            spin=fs["omega"],
            domain=domain,
            nx=nx,
            ny=ny,
            t=t,
        )
        snap = field_snaps[t]
        rho = snap["rho"]
        momentum = np.stack([rho * snap["ux"], rho * snap["uy"]], axis=-1)
        fields = GridFields(
            grid=grid,
            rho=rho,
            momentum=momentum,
            spin_density=rho * snap["omega_bar"],
            r_floe=1.0,
        )
        cell_snapshots.append((t, cells))
        field_snapshots.append((t, fields))
    return comparison_report(cell_snapshots, field_snapshots)
