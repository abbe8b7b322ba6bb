"""Particle system assembly and time stepping.

Per-floe totals combine the pairwise contact forces (scaled by ``1/n`` under
mean-field scaling) with quadratic ocean drag:

    F_i = (1/n) sum_j (f_n + f_t) + alpha_i (u_o - v_i) |u_o - v_i|
    T_i = (1/n) sum_j r_i (n x f_t) + beta_i (curl(u_o)/2 - w_i) |curl(u_o)/2 - w_i|

The state advances with forward Euler at a fixed step; forces are evaluated
once at the pre-step state.  Contact candidates come from a periodic cell
list (cell size at least twice the largest radius, 3x3 neighborhoods) with a
brute-force all-pairs oracle used for small, non-periodic, or coarse-grid
systems and for verification.

Reproducibility contract: pair contributions are accumulated in ascending
partner order for each floe, so results are bit-identical for a given system
regardless of how the candidate pairs were found, and independent of worker
thread counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    Domain,
    FloeParams,
    FloeState,
    IntegrationDivergedError,
    MaterialParams,
    OceanField,
    PackingError,
    ParameterError,
    min_image_displacement,
)
from .contact import CONTACT_TIME_COEFF, G_DEN, G_NUM


@dataclass(frozen=True)
class DragCoefficients:
    """Quadratic ocean-drag coefficients of one floe (translation, spin)."""

    alpha: float
    beta: float


def drag_coeffs(params: FloeParams, materials: MaterialParams) -> DragCoefficients:
    """Translational and rotational drag coefficients.

    ``alpha = pi rho_o (2 C_v r D + C_h r^2)`` and
    ``beta = pi r^4 rho_o (C_v D + r C_h / 5)`` with ``D`` the floe draft.
    """
    r, d = params.radius, params.draft
    rho = materials.ocean_density
    alpha = math.pi * rho * (2.0 * materials.drag_vertical * r * d + materials.drag_horizontal * r**2)
    beta = math.pi * r**4 * rho * (materials.drag_vertical * d + r * materials.drag_horizontal / 5.0)
    return DragCoefficients(alpha=alpha, beta=beta)


@dataclass
class ParticleSystem:
    """State of ``n`` floes stored as flat arrays (struct-of-arrays).

    Positions are kept twice: wrapped into the domain for contact search and
    unwrapped for orbital angular momentum.  Derived per-floe quantities
    (mass, inertia, draft, drag coefficients) are recomputed from the
    geometry on construction and are never mutated.
    """

    domain: Domain
    materials: MaterialParams
    ocean: OceanField
    radius: np.ndarray
    thickness: np.ndarray
    x: np.ndarray
    x_unwrapped: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    time: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        n = self.n
        for name in ("radius", "thickness", "theta", "omega"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ParameterError(f"{name} must have shape ({n},), got {arr.shape}")
            setattr(self, name, arr)
        for name in ("x", "x_unwrapped", "v"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (n, 2):
                raise ParameterError(f"{name} must have shape ({n}, 2), got {arr.shape}")
            setattr(self, name, arr)
        if np.any(self.radius <= 0) or np.any(self.thickness <= 0):
            raise ParameterError("all radii and thicknesses must be positive")
        self._check_finite()
        rho = self.materials.ice_density
        self.mass = rho * np.pi * self.radius**2 * self.thickness
        self.inertia = self.mass * self.radius**2
        self.draft = 0.9 * self.thickness
        rho_o = self.materials.ocean_density
        self.alpha = np.pi * rho_o * (
            2.0 * self.materials.drag_vertical * self.radius * self.draft
            + self.materials.drag_horizontal * self.radius**2
        )
        self.beta = np.pi * self.radius**4 * rho_o * (
            self.materials.drag_vertical * self.draft
            + self.radius * self.materials.drag_horizontal / 5.0
        )

    def _check_finite(self):
        for name in ("x", "x_unwrapped", "v", "theta", "omega"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ParameterError(f"non-finite values in {name}")

    @property
    def n(self) -> int:
        return len(np.atleast_1d(self.radius))

    @classmethod
    def create(
        cls,
        domain: Domain,
        materials: MaterialParams,
        ocean: OceanField,
        radius,
        thickness,
        positions,
        velocities=None,
        theta=None,
        omega=None,
        time: float = 0.0,
        seed: int | None = None,
    ) -> "ParticleSystem":
        """Build a system, wrapping positions and defaulting state to rest."""
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        n = len(radius)
        thickness = np.broadcast_to(np.asarray(thickness, dtype=float), (n,)).copy()
        x_unwrapped = np.asarray(positions, dtype=float).reshape(n, 2).copy()
        x = domain.wrap(x_unwrapped)
        v = (
            np.zeros((n, 2))
            if velocities is None
            else np.asarray(velocities, dtype=float).reshape(n, 2).copy()
        )
        th = np.zeros(n) if theta is None else np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
        om = np.zeros(n) if omega is None else np.asarray(omega, dtype=float).copy()
        return cls(
            domain=domain,
            materials=materials,
            ocean=ocean,
            radius=radius,
            thickness=thickness,
            x=x,
            x_unwrapped=x_unwrapped,
            v=v,
            theta=th,
            omega=om,
            time=time,
            seed=seed,
        )

    def floe_params(self, i: int) -> FloeParams:
        return FloeParams(
            radius=float(self.radius[i]),
            thickness=float(self.thickness[i]),
            ice_density=self.materials.ice_density,
        )

    def floe_state(self, i: int) -> FloeState:
        return FloeState(
            position=(float(self.x[i, 0]), float(self.x[i, 1])),
            velocity=(float(self.v[i, 0]), float(self.v[i, 1])),
            orientation=float(self.theta[i]),
            spin=float(self.omega[i]),
            position_unwrapped=(float(self.x_unwrapped[i, 0]), float(self.x_unwrapped[i, 1])),
        )


# ---------------------------------------------------------------------------
# neighbor search
# ---------------------------------------------------------------------------

def brute_force_pairs(system: ParticleSystem) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs oracle: every (i, j), i < j, with d < r_i + r_j."""
    n = system.n
    if n < 2:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    pi, pj = np.triu_indices(n, k=1)
    disp = min_image_displacement(system.x[pi], system.x[pj], system.domain)
    dist = np.hypot(disp[:, 0], disp[:, 1])
    keep = dist < system.radius[pi] + system.radius[pj]
    return pi[keep], pj[keep]


def _cell_list_candidates(system: ParticleSystem) -> tuple[np.ndarray, np.ndarray] | None:
    """Candidate pairs from a periodic cell list, or None if inapplicable.

    Cell size is at least twice the largest radius, so any touching pair lies
    in the same or an adjacent cell; candidates are harvested from the 3x3
    neighborhood with periodic wrap.  Falls back (returns None) when the grid
    would be coarser than 3 cells per axis or the domain is not fully
    periodic.
    """
    if not (system.domain.periodic[0] and system.domain.periodic[1]):
        return None
    cell_min = 2.0 * float(np.max(system.radius))
    lengths = system.domain.lengths
    gx = int(lengths[0] // cell_min)
    gy = int(lengths[1] // cell_min)
    if gx < 3 or gy < 3:
        return None
    n = system.n
    lo = np.asarray(system.domain.lower)
    ix = np.clip((np.floor((system.x[:, 0] - lo[0]) / (lengths[0] / gx))).astype(np.intp), 0, gx - 1)
    iy = np.clip((np.floor((system.x[:, 1] - lo[1]) / (lengths[1] / gy))).astype(np.intp), 0, gy - 1)
    cid = ix * gy + iy
    order = np.argsort(cid, kind="stable")
    cid_sorted = cid[order]

    out_i, out_j = [], []
    all_i = np.arange(n, dtype=np.intp)
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            ncid = np.mod(ix + ox, gx) * gy + np.mod(iy + oy, gy)
            left = np.searchsorted(cid_sorted, ncid, side="left")
            right = np.searchsorted(cid_sorted, ncid, side="right")
            counts = right - left
            total = int(counts.sum())
            if total == 0:
                continue
            starts = np.cumsum(counts) - counts
            within = np.arange(total) - np.repeat(starts, counts)
            cj = order[np.repeat(left, counts) + within]
            ci = np.repeat(all_i, counts)
            keep = ci < cj
            out_i.append(ci[keep])
            out_j.append(cj[keep])
    if not out_i:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    return np.concatenate(out_i), np.concatenate(out_j)


def neighbor_pairs(
    system: ParticleSystem, policy: str = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate contact pairs ``(i, j)`` with ``i < j``.

    The returned set is a superset of the true contact set (false positives
    carry zero force once the overlap filter is applied) and, after the
    ``overlap < 0`` filter, equals the brute-force all-pairs contact set
    exactly.  ``policy`` is one of ``auto`` (cell list for large periodic
    systems), ``cell``, or ``brute``.
    """
    if policy not in ("auto", "cell", "brute"):
        raise ParameterError(f"unknown neighbor policy {policy!r}")
    if policy == "brute" or (policy == "auto" and system.n <= 64):
        return brute_force_pairs(system)
    cand = _cell_list_candidates(system)
    if cand is None:
        if policy == "cell":
            raise ParameterError(
                "cell list requires a fully periodic domain at least 3 cells wide"
            )
        return brute_force_pairs(system)
    return cand


def contact_pairs(
    system: ParticleSystem, policy: str = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """Actual contacts (overlap < 0), in canonical ascending (i, j) order."""
    pi, pj = neighbor_pairs(system, policy)
    if len(pi) == 0:
        return pi, pj
    disp = min_image_displacement(system.x[pi], system.x[pj], system.domain)
    dist = np.hypot(disp[:, 0], disp[:, 1])
    keep = dist < system.radius[pi] + system.radius[pj]
    pi, pj = pi[keep], pj[keep]
    order = np.lexsort((pj, pi))
    return pi[order], pj[order]


# ---------------------------------------------------------------------------
# vectorized pair kernel
# ---------------------------------------------------------------------------

def pair_contact_arrays(system: ParticleSystem, pi: np.ndarray, pj: np.ndarray) -> dict:
    """Contact quantities for the given pairs, vectorized.

    Mirrors ``contact.pair_force_torque`` operation by operation, so the two
    paths agree to the last bit; pairs are assumed pre-filtered to
    ``overlap < 0``.
    """
    mat = system.materials
    disp = min_image_displacement(system.x[pi], system.x[pj], system.domain)
    dist = np.hypot(disp[:, 0], disp[:, 1])
    normal = disp / dist[:, None]
    tangent = np.stack([-normal[:, 1], normal[:, 0]], axis=1)
    r_i, r_j = system.radius[pi], system.radius[pj]
    overlap = dist - (r_i + r_j)
    h_eff = np.minimum(system.thickness[pi], system.thickness[pj])
    r_eff = r_i * r_j / (r_i + r_j)
    m_i, m_j = system.mass[pi], system.mass[pj]
    m_eff = m_i * m_j / (m_i + m_j)

    xi = overlap * r_eff / (2.0 * h_eff**2)
    g_num = (G_NUM[0] * xi + G_NUM[1]) * xi + G_NUM[2]
    g_den = (G_DEN[0] * xi + G_DEN[1]) * xi + G_DEN[2]
    k1 = np.pi * mat.contact_modulus * h_eff * (g_num / g_den)
    k2 = mat.damping_factor * np.sqrt(5.0 * k1 * m_eff)
    k3 = 6.0 * (mat.shear_modulus / mat.contact_modulus) * k1

    dv = system.v[pi] - system.v[pj]
    rel_speed = np.hypot(dv[:, 0], dv[:, 1])
    t_c = np.minimum(
        mat.t_c_max,
        CONTACT_TIME_COEFF * (m_eff / k1) ** 0.4 * (rel_speed + mat.v_star) ** -0.2,
    )

    approach = np.einsum("ij,ij->i", dv, normal)
    fn_scalar = k1 * overlap + k2 * approach
    f_normal = fn_scalar[:, None] * normal

    slip_rate = (
        np.einsum("ij,ij->i", -dv, tangent)
        - r_j * system.omega[pj]
        - r_i * system.omega[pi]
    )
    shear = t_c * slip_rate
    ft_raw = k3 * shear
    fn_mag = np.hypot(f_normal[:, 0], f_normal[:, 1])
    ft_mag = np.abs(ft_raw)
    uncapped = ft_mag <= mat.friction * fn_mag
    coulomb = np.where(uncapped, 1.0, mat.friction * fn_mag / np.where(uncapped, 1.0, ft_mag))
    f_tangent = (coulomb * ft_raw)[:, None] * tangent
    cross = normal[:, 0] * f_tangent[:, 1] - normal[:, 1] * f_tangent[:, 0]

    return {
        "i": pi,
        "j": pj,
        "overlap": overlap,
        "distance": dist,
        "normal": normal,
        "tangent": tangent,
        "h_eff": h_eff,
        "r_eff": r_eff,
        "m_eff": m_eff,
        "k_elastic": k1,
        "k_damp": k2,
        "k_tangent": k3,
        "t_contact": t_c,
        "approach": approach,
        "slip_rate": slip_rate,
        "shear": shear,
        "coulomb": coulomb,
        "f_normal": f_normal,
        "f_tangent": f_tangent,
        "torque_i": r_i * cross,
        "torque_j": r_j * cross,
    }


def total_force_torque(
    system: ParticleSystem,
    mean_field_scaling: bool = True,
    policy: str = "auto",
    extremes: dict | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-floe total force ``F`` (n, 2) and torque ``T`` (n,).

    Contact sums are accumulated in fixed ascending-partner order per floe
    (bit-reproducible); with ``mean_field_scaling`` they carry the ``1/n``
    prefactor.  Ocean drag is quadratic in the velocity mismatch.  When an
    ``extremes`` dict is supplied, running maxima of ``|k2|``, ``k3``,
    ``t_c`` and ``|F|`` are tracked (used by the energy lower-bound check).
    """
    n = system.n
    force = np.zeros((n, 2))
    torque = np.zeros(n)
    pi, pj = contact_pairs(system, policy)
    if len(pi):
        pc = pair_contact_arrays(system, pi, pj)
        f_pair = pc["f_normal"] + pc["f_tangent"]
        receivers = np.concatenate([pi, pj])
        partners = np.concatenate([pj, pi])
        f_directed = np.concatenate([f_pair, -f_pair])
        tq_directed = np.concatenate([pc["torque_i"], pc["torque_j"]])
        order = np.lexsort((partners, receivers))
        rec = receivers[order]
        force[:, 0] = np.bincount(rec, weights=f_directed[order, 0], minlength=n)
        force[:, 1] = np.bincount(rec, weights=f_directed[order, 1], minlength=n)
        torque = np.bincount(rec, weights=tq_directed[order], minlength=n)
        if mean_field_scaling:
            force /= n
            torque /= n
        if extremes is not None:
            extremes["k_damp_max"] = max(
                extremes.get("k_damp_max", 0.0), float(np.max(np.abs(pc["k_damp"])))
            )
            extremes["k_tangent_max"] = max(
                extremes.get("k_tangent_max", 0.0), float(np.max(pc["k_tangent"]))
            )
            extremes["t_contact_max"] = max(
                extremes.get("t_contact_max", 0.0), float(np.max(pc["t_contact"]))
            )

    u_ocean = system.ocean.velocity(system.x)
    rel = u_ocean - system.v
    speed = np.hypot(rel[:, 0], rel[:, 1])
    force += system.alpha[:, None] * speed[:, None] * rel
    rel_spin = 0.5 * system.ocean.curl(system.x) - system.omega
    torque = torque + system.beta * np.abs(rel_spin) * rel_spin

    if extremes is not None:
        extremes["force_max"] = max(
            extremes.get("force_max", 0.0), float(np.max(np.hypot(force[:, 0], force[:, 1]), initial=0.0))
        )
    return force, torque


def step_euler(
    system: ParticleSystem,
    dt: float,
    mean_field_scaling: bool = True,
    policy: str = "auto",
    extremes: dict | None = None,
    forces: tuple[np.ndarray, np.ndarray] | None = None,
) -> ParticleSystem:
    """One forward-Euler step; forces evaluated once at the pre-step state.

    ``forces`` may carry a precomputed ``(F, T)`` pair for the current state
    (used by run loops that also inspect the totals).
    """
    if dt <= 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if forces is None:
        forces = total_force_torque(system, mean_field_scaling, policy, extremes)
    force, torque = forces
    x_unwrapped = system.x_unwrapped + dt * system.v
    v = system.v + dt * force / system.mass[:, None]
    omega = system.omega + dt * torque / system.inertia
    theta = np.mod(system.theta + dt * system.omega, 2.0 * np.pi)

    bad = ~(
        np.isfinite(x_unwrapped).all(axis=1)
        & np.isfinite(v).all(axis=1)
        & np.isfinite(omega)
    )
    if bad.any():
        raise IntegrationDivergedError(int(np.argmax(bad)), system.time + dt)

    return replace(
        system,
        x=system.domain.wrap(x_unwrapped),
        x_unwrapped=x_unwrapped,
        v=v,
        theta=theta,
        omega=omega,
        time=system.time + dt,
    )


# ---------------------------------------------------------------------------
# population sampling
# ---------------------------------------------------------------------------

def sample_powerlaw_radii(
    n: int,
    r_min: float,
    r_max: float,
    exponent: float = 2.0,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> np.ndarray:
    """Radii with density proportional to ``r**-exponent`` on [r_min, r_max].

    Uses the closed-form inverse CDF; for the default exponent 2 this is
    ``r = 1 / (1/r_min - U (1/r_min - 1/r_max))`` with ``U`` uniform(0, 1).
    Deterministic for a fixed seed (PCG64 generator, one uniform draw per
    floe).
    """
    if not 0 < r_min < r_max:
        raise ParameterError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if rng is None:
        rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=n)
    if exponent == 2.0:
        return 1.0 / (1.0 / r_min - u * (1.0 / r_min - 1.0 / r_max))
    if exponent == 1.0:
        return r_min * (r_max / r_min) ** u
    p = 1.0 - exponent
    return (r_min**p + u * (r_max**p - r_min**p)) ** (1.0 / p)


def init_nonoverlapping(
    n: int,
    radii: np.ndarray,
    domain: Domain,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Uniform rejection sampling of non-overlapping centers.

    Every accepted pair satisfies ``d >= r_i + r_j`` in the minimum-image
    metric.  Raises ``PackingError`` (reporting the achieved count) if any
    floe exceeds ``max_attempts`` draws.
    """
    radii = np.asarray(radii, dtype=float)
    if rng is None:
        rng = np.random.default_rng(seed)
    lo = np.asarray(domain.lower)
    lengths = domain.lengths
    placed = np.empty((n, 2))
    for k in range(n):
        for _ in range(max_attempts):
            candidate = lo + rng.uniform(0.0, 1.0, size=2) * lengths
            if k == 0:
                placed[0] = candidate
                break
            disp = min_image_displacement(placed[:k], candidate[None, :], domain)
            dist = np.hypot(disp[:, 0], disp[:, 1])
            if np.all(dist >= radii[:k] + radii[k]):
                placed[k] = candidate
                break
        else:
            raise PackingError(placed=k, requested=n, max_attempts=max_attempts)
    return placed


def init_lattice(nx: int, ny: int, domain: Domain) -> np.ndarray:
    """Centers of the uniform nx-by-ny partition of the domain, row-major."""
    if nx < 1 or ny < 1:
        raise ParameterError("lattice dimensions must be at least 1")
    lo = np.asarray(domain.lower)
    hx, hy = domain.lengths / (nx, ny)
    xs = lo[0] + (np.arange(nx) + 0.5) * hx
    ys = lo[1] + (np.arange(ny) + 0.5) * hy
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)
