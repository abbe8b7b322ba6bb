"""Figure regeneration from run artifacts.

Three figure families: floe trajectory panels (disks at radius scale,
velocity arrows, spin as fill color), global moment time series, and
side-by-side particle/continuum field comparisons with difference maps.
Every figure embeds the run id in its footer; rendering is deterministic
(Agg backend, fixed dpi, fixed PNG metadata), and the scripts never modify
the run artifacts they read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import EllipseCollection

from .io import (
    SchemaError,
    nearest_time,
    ocean_velocity_fn,
    read_compare,
    read_fields,
    read_floes,
    read_manifest,
    read_moments,
)

_SAVE_KW = dict(dpi=150, metadata={"Software": "floeplots"})


@dataclass
class PlotSpec:
    """Rendering options for one run directory."""

    run_dir: Path
    panel_times: tuple[float, ...] = (0.001, 0.1, 1.0, 10.0)
    spin_range: tuple[float, float] = (-0.5, 0.5)
    out_dir: Path | None = None

    def __post_init__(self):
        self.run_dir = Path(self.run_dir)
        self.out_dir = Path(self.out_dir) if self.out_dir else self.run_dir / "figures"


def _stamp(fig, run_dir: Path) -> None:
    try:
        run_id = read_manifest(run_dir).get("run_id", Path(run_dir).name)
    except SchemaError:
        run_id = Path(run_dir).name
    fig.text(0.995, 0.005, f"run: {run_id}", ha="right", va="bottom",
             fontsize=6, color="0.4")


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def _domain_limits(manifest: dict, snaps: dict) -> tuple[float, float, float, float]:
    dom = manifest.get("config", {}).get("domain", {})
    if "half_width" in dom:
        w = float(dom["half_width"])
        return -w, w, -w, w
    if "lower" in dom and "upper" in dom:
        (x0, y0), (x1, y1) = dom["lower"], dom["upper"]
        return float(x0), float(x1), float(y0), float(y1)
    xs = np.concatenate([s["x"] for s in snaps.values()])
    ys = np.concatenate([s["y"] for s in snaps.values()])
    return xs.min(), xs.max(), ys.min(), ys.max()


def plot_trajectories(run_dir, spec: PlotSpec | None = None) -> list[Path]:
    """Multi-panel floe maps at the requested times (nearest snapshots)."""
    spec = spec or PlotSpec(run_dir)
    snaps = read_floes(spec.run_dir)
    manifest = read_manifest(spec.run_dir)
    x0, x1, y0, y1 = _domain_limits(manifest, snaps)

    n_panels = len(spec.panel_times)
    ncols = 2 if n_panels > 1 else 1
    nrows = (n_panels + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.2 * ncols, 4.6 * nrows),
                             squeeze=False, constrained_layout=True)
    mappable = None
    for k, requested in enumerate(spec.panel_times):
        ax = axes[k // ncols][k % ncols]
        actual, offset = nearest_time(snaps.keys(), requested)
        snap = snaps[actual]
        diameters = 2.0 * snap["r"]
        discs = EllipseCollection(
            diameters, diameters, np.zeros_like(diameters), units="xy",
            offsets=np.stack([snap["x"], snap["y"]], axis=1),
            transOffset=ax.transData, cmap="coolwarm",
            edgecolors="0.2", linewidths=0.3,
        )
        discs.set_array(snap["omega"])
        discs.set_clim(*spec.spin_range)
        ax.add_collection(discs)
        mappable = discs
        ax.quiver(snap["x"], snap["y"], snap["vx"], snap["vy"],
                  angles="xy", scale_units="xy", scale=1.0, width=0.003, color="k")
        title = f"t = {actual:g}"
        if abs(offset) > 1e-12:
            title += f" (requested {requested:g}, offset {offset:+g})"
        ax.set_title(title, fontsize=10)
        ax.set_xlim(x0, x1)
        ax.set_ylim(y0, y1)
        ax.set_aspect("equal")
    for k in range(n_panels, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.colorbar(mappable, ax=axes, shrink=0.8, label="spin")
    _stamp(fig, spec.run_dir)
    return [_save(fig, spec.out_dir / "trajectories.png")]


def plot_moments(run_dir, spec: PlotSpec | None = None) -> list[Path]:
    """Time series of the global moments plus snapshot-based mean trends."""
    spec = spec or PlotSpec(run_dir)
    mom = read_moments(spec.run_dir)
    snaps = read_floes(spec.run_dir)
    manifest = read_manifest(spec.run_dir)
    ocean = ocean_velocity_fn(manifest)

    snap_times = np.asarray(sorted(snaps.keys()))
    mismatch = []
    mean_spin = []
    for t in snap_times:
        s = snaps[t]
        uo_x, uo_y = ocean(s["x"], s["y"])
        mismatch.append(np.mean(np.hypot(s["vx"] - uo_x, s["vy"] - uo_y)))
        mean_spin.append(np.mean(s["omega"]))

    t = mom["t"]
    fig, axes = plt.subplots(2, 4, figsize=(18, 7.5), constrained_layout=True)

    ax = axes[0][0]
    ax.plot(t, mom["M1vx"] / mom["M0"], label="<v_x>")
    ax.plot(t, mom["M1vy"] / mom["M0"], label="<v_y>")
    ax.set_title("mass-weighted mean velocity")
    ax.legend(fontsize=8)

    ax = axes[0][1]
    ax.plot(snap_times, mismatch, "o-")
    ax.set_title("mean |v - u_o| (snapshots)")

    ax = axes[0][2]
    ax.plot(snap_times, mean_spin, "o-")
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_title("mean spin (snapshots)")

    ax = axes[0][3]
    ax.plot(t, mom["M1vx"], label="x")
    ax.plot(t, mom["M1vy"], label="y")
    ax.set_title("total momentum")
    ax.legend(fontsize=8)

    ax = axes[1][0]
    ax.plot(t, mom["M1w"])
    ax.set_title("total angular momentum")

    ax = axes[1][1]
    for key, label in (("M2v", "translational"), ("M2w", "rotational"), ("M2", "total")):
        ax.plot(t, mom[key], label=label)
    ax.set_title("kinetic / total energy")
    ax.legend(fontsize=8)

    ax = axes[1][2]
    ax.plot(t, mom["M2x"])
    ax.set_title("normal strain energy (collision bursts)")

    ax = axes[1][3]
    ax.plot(t, mom["Dn"], label="normal")
    ax.plot(t, mom["Dt"], label="tangential")
    ax.set_title("contact dissipation rates")
    ax.legend(fontsize=8)

    for row in axes:
        for ax in row:
            ax.set_xlabel("t", fontsize=8)
    _stamp(fig, spec.run_dir)
    return [_save(fig, spec.out_dir / "moments.png")]


def _cellify(nodal: np.ndarray) -> np.ndarray:
    """Average the four corner nodes of each cell (periodic wrap)."""
    return 0.25 * (
        nodal
        + np.roll(nodal, -1, axis=0)
        + np.roll(nodal, -1, axis=1)
        + np.roll(np.roll(nodal, -1, axis=0), -1, axis=1)
    )


def plot_comparison(run_dir, spec: PlotSpec | None = None) -> list[Path]:
    """Side-by-side particle/continuum maps with difference panels.

    One figure per comparison time found in ``compare.json``; densities are
    shown normalized by their domain means (matching the reported metric).
    """
    spec = spec or PlotSpec(run_dir)
    fields = read_fields(spec.run_dir, "fields.csv")
    cells = read_fields(spec.run_dir, "cells.csv")
    compare = read_compare(spec.run_dir)

    sample_f = next(iter(fields.values()))
    sample_c = next(iter(cells.values()))
    if (sample_f["nx"], sample_f["ny"]) != (sample_c["nx"], sample_c["ny"]):
        raise SchemaError(
            f"grid mismatch: fields {(sample_f['nx'], sample_f['ny'])} vs "
            f"cells {(sample_c['nx'], sample_c['ny'])}"
        )

    written = []
    for entry in compare["comparisons"]:
        t_req = entry["time"]
        tf, _ = nearest_time(fields.keys(), t_req)
        tc, _ = nearest_time(cells.keys(), t_req)
        f, c = fields[tf], cells[tc]

        f_rho = _cellify(f["rho"])
        rows = [
            ("rho / <rho>", c["rho"] / np.mean(c["rho"]), f_rho / np.mean(f_rho)),
            ("|u|", np.hypot(c["ux"], c["uy"]), _cellify(np.hypot(f["ux"], f["uy"]))),
            ("spin", c["omega_bar"], _cellify(f["omega_bar"])),
        ]
        fig, axes = plt.subplots(3, 3, figsize=(13, 11), constrained_layout=True)
        extent = (c["x"].min(), c["x"].max(), c["y"].min(), c["y"].max())
        for r, (label, particle, continuum) in enumerate(rows):
            finite = np.isfinite(particle)
            lo = min(particle[finite].min(initial=0.0), continuum.min())
            hi = max(particle[finite].max(initial=0.0), continuum.max())
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            diff = particle - continuum
            dmax = np.nanmax(np.abs(diff)) or 0.5
            for col, (data, title, cmap, vmin, vmax) in enumerate(
                (
                    (particle, f"particle {label}", "viridis", lo, hi),
                    (continuum, f"continuum {label}", "viridis", lo, hi),
                    (diff, "difference", "coolwarm", -dmax, dmax),
                )
            ):
                ax = axes[r][col]
                im = ax.imshow(
                    data.T, origin="lower", extent=extent, cmap=cmap,
                    vmin=vmin, vmax=vmax, interpolation="nearest",
                )
                ax.set_title(title, fontsize=9)
                fig.colorbar(im, ax=ax, shrink=0.85)
        fig.suptitle(f"model comparison at t = {tf:g}", fontsize=12)
        _stamp(fig, spec.run_dir)
        written.append(_save(fig, spec.out_dir / f"comparison_t{tf:g}.png"))
    return written
