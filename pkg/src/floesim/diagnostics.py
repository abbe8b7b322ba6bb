"""Global moments and balance-law verification.

Tracks the conserved/dissipated quantities of the particle system: total
mass, linear momentum, angular momentum (orbital from unwrapped positions
plus spin), the three energy components, the two quadratic contact
dissipation sums, and the ocean-drag power input.  ``balance_residuals``
checks the recorded time series against the exact balance laws by central
differencing; ``groenwall_bound_check`` verifies the exponential lower bound
on the total energy of drag-free runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MaterialParams, ParameterError
from .contact import G_DEN, G_NUM
from .particle import ParticleSystem, contact_pairs, pair_contact_arrays

#: Fixed Gauss-Legendre rule used for the strain-energy integral; the
#: integrand is smooth on [overlap, 0], so 16 nodes reach quadrature noise.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class MomentRecord:
    """Snapshot of the global moments at one sample time.

    ``dissipation_normal`` and ``dissipation_tangential`` are the two
    quadratic contact sums of the energy balance (both non-positive);
    ``power_drag_*`` are the drag work rates entering the same balance.
    ``drag_force``/``drag_torque`` are the right-hand sides of the linear and
    angular momentum balances.  ``strain_peak`` is the quadratic strain
    observable ``sum_{i<j} k1 delta^2 / 2`` used for collision-burst
    detection (no mean-field prefactor).
    """

    t: float
    total_mass: float
    momentum: tuple[float, float]
    angular_momentum: float
    strain_energy: float
    kinetic_translational: float
    kinetic_rotational: float
    total_energy: float
    dissipation_normal: float
    dissipation_tangential: float
    power_drag_linear: float
    power_drag_rotational: float
    drag_force: tuple[float, float]
    drag_torque: float
    strain_peak: float


def pair_strain_energy(
    overlap: float,
    h_eff: float,
    r_eff: float,
    materials: MaterialParams,
) -> float:
    """Stored normal strain energy of one contact, ``int_0^delta k1(s) s ds``.

    The overlap-dependent stiffness is re-evaluated at each of the 16
    Gauss-Legendre nodes on ``[overlap, 0]``; the result is non-negative for
    ``overlap <= 0``.
    """
    if overlap > 0.0:
        raise ParameterError("pair_strain_energy requires overlap <= 0")
    return float(
        _strain_energy_vec(
            np.asarray([overlap]), np.asarray([h_eff]), np.asarray([r_eff]), materials
        )[0]
    )


def _strain_energy_vec(
    overlap: np.ndarray, h_eff: np.ndarray, r_eff: np.ndarray, materials: MaterialParams
) -> np.ndarray:
    # s = (overlap/2)(1 - u) maps u in [-1, 1] onto [overlap, 0];
    # int_0^overlap k1(s) s ds = (overlap/2) * sum w_k k1(s_k) s_k  (>= 0).
    half = 0.5 * overlap[:, None]
    s = half * (1.0 - _GL_NODES[None, :])
    xi = s * r_eff[:, None] / (2.0 * h_eff[:, None] ** 2)
    g_num = (G_NUM[0] * xi + G_NUM[1]) * xi + G_NUM[2]
    g_den = (G_DEN[0] * xi + G_DEN[1]) * xi + G_DEN[2]
    k1 = np.pi * materials.contact_modulus * h_eff[:, None] * (g_num / g_den)
    return half[:, 0] * np.sum(_GL_WEIGHTS[None, :] * k1 * s, axis=1)


def moments(
    system: ParticleSystem,
    mean_field_scaling: bool = True,
    policy: str = "auto",
) -> MomentRecord:
    """Global moments of the current state.

    The strain energy and the two dissipation sums run over ordered pairs
    with the ``1/(2n)`` prefactor (each unordered contact counted twice);
    with mean-field scaling disabled the ``1/n`` factor is dropped so the
    balance laws remain exact against the unscaled dynamics.  Angular
    momentum uses unwrapped positions.
    """
    m = system.mass
    total_mass = float(np.sum(m))
    momentum = m[:, None] * system.v
    momentum_sum = momentum.sum(axis=0)
    cross_xv = system.x_unwrapped[:, 0] * system.v[:, 1] - system.x_unwrapped[:, 1] * system.v[:, 0]
    angular = float(np.sum(m * cross_xv + system.inertia * system.omega))
    ke_trans = 0.5 * float(np.sum(m * (system.v[:, 0] ** 2 + system.v[:, 1] ** 2)))
    ke_rot = 0.5 * float(np.sum(system.inertia * system.omega**2))

    pref = 1.0 / system.n if mean_field_scaling else 1.0
    strain = 0.0
    diss_n = 0.0
    diss_t = 0.0
    strain_peak = 0.0
    pi, pj = contact_pairs(system, policy)
    if len(pi):
        pc = pair_contact_arrays(system, pi, pj)
        strain = pref * float(
            np.sum(_strain_energy_vec(pc["overlap"], pc["h_eff"], pc["r_eff"], system.materials))
        )
        diss_n = pref * float(np.sum(pc["k_damp"] * pc["approach"] ** 2))
        diss_t = -pref * float(
            np.sum(pc["coulomb"] * pc["k_tangent"] * pc["t_contact"] * pc["slip_rate"] ** 2)
        )
        strain_peak = 0.5 * float(np.sum(pc["k_elastic"] * pc["overlap"] ** 2))

    u_ocean = system.ocean.velocity(system.x)
    rel = u_ocean - system.v
    speed = np.hypot(rel[:, 0], rel[:, 1])
    f_drag = system.alpha[:, None] * speed[:, None] * rel
    p_drag_lin = float(np.sum(f_drag * system.v))
    rel_spin = 0.5 * system.ocean.curl(system.x) - system.omega
    t_drag = system.beta * np.abs(rel_spin) * rel_spin
    p_drag_rot = float(np.sum(system.omega * t_drag))
    cross_xf = system.x_unwrapped[:, 0] * f_drag[:, 1] - system.x_unwrapped[:, 1] * f_drag[:, 0]
    drag_torque = float(np.sum(cross_xf + t_drag))

    return MomentRecord(
        t=system.time,
        total_mass=total_mass,
        momentum=(float(momentum_sum[0]), float(momentum_sum[1])),
        angular_momentum=angular,
        strain_energy=strain,
        kinetic_translational=ke_trans,
        kinetic_rotational=ke_rot,
        total_energy=strain + ke_trans + ke_rot,
        dissipation_normal=diss_n,
        dissipation_tangential=diss_t,
        power_drag_linear=p_drag_lin,
        power_drag_rotational=p_drag_rot,
        drag_force=(float(np.sum(f_drag[:, 0])), float(np.sum(f_drag[:, 1]))),
        drag_torque=drag_torque,
        strain_peak=strain_peak,
    )


def balance_residuals(history: list[MomentRecord], dt: float) -> dict:
    """Residuals of the momentum, angular-momentum and energy balances.

    Central-differences the recorded moments and subtracts the recorded
    right-hand sides; ``dt`` is the sample spacing of ``history``.  Returns
    max and RMS residuals per balance.  The angular residual is only
    meaningful for non-periodic domains (orbital angular momentum is not
    translation invariant on a torus).
    """
    if len(history) < 3:
        raise ParameterError("balance_residuals needs at least 3 samples")
    t = np.array([rec.t for rec in history])
    spacing = np.diff(t)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-12):
        raise ParameterError("history must be uniformly sampled")
    h = float(spacing[0])

    momentum = np.array([rec.momentum for rec in history])
    drag_force = np.array([rec.drag_force for rec in history])
    d_momentum = (momentum[2:] - momentum[:-2]) / (2.0 * h)
    res_mom = np.hypot(*(d_momentum - drag_force[1:-1]).T)

    angular = np.array([rec.angular_momentum for rec in history])
    drag_torque = np.array([rec.drag_torque for rec in history])
    res_ang = np.abs((angular[2:] - angular[:-2]) / (2.0 * h) - drag_torque[1:-1])

    energy = np.array([rec.total_energy for rec in history])
    rhs = np.array(
        [
            rec.dissipation_normal
            + rec.dissipation_tangential
            + rec.power_drag_linear
            + rec.power_drag_rotational
            for rec in history
        ]
    )
    res_energy = np.abs((energy[2:] - energy[:-2]) / (2.0 * h) - rhs[1:-1])

    return {
        "momentum": {"max": float(res_mom.max()), "rms": float(np.sqrt(np.mean(res_mom**2)))},
        "angular": {"max": float(res_ang.max()), "rms": float(np.sqrt(np.mean(res_ang**2)))},
        "energy": {"max": float(res_energy.max()), "rms": float(np.sqrt(np.mean(res_energy**2)))},
    }


@dataclass(frozen=True)
class EnergyBoundConstants:
    """Constants of the total-energy lower bound for a drag-free run.

    The stiffness maxima are the values attained along the trajectory (the
    bound's constants are existential, so any valid upper bound works); the
    contact-duration bound is the configured cap.
    """

    n: int
    m_min: float
    m_max: float
    k_damp_max: float
    k_tangent_max: float
    t_contact_max: float

    @classmethod
    def from_run(cls, system: ParticleSystem, extremes: dict) -> "EnergyBoundConstants":
        if np.any(system.alpha > 0) or np.any(system.beta > 0):
            raise ParameterError("energy lower bound requires a drag-free run (alpha=beta=0)")
        return cls(
            n=system.n,
            m_min=float(np.min(system.mass)),
            m_max=float(np.max(system.mass)),
            k_damp_max=float(extremes.get("k_damp_max", 0.0)),
            k_tangent_max=float(extremes.get("k_tangent_max", 0.0)),
            t_contact_max=system.materials.t_c_max,
        )

    @property
    def decay_rate(self) -> float:
        return (
            2.0 * self.k_damp_max * self.m_max / self.m_min**2
            + 6.0 * self.k_tangent_max * self.t_contact_max / self.m_min
        )

    @property
    def source_rate(self) -> float:
        return self.k_damp_max / (self.n * self.m_min**2)


def groenwall_bound_check(
    history: list[MomentRecord],
    constants: EnergyBoundConstants,
    rel_tol: float = 1e-12,
) -> tuple[bool, float]:
    """Check ``M2(t) >= M2(0) e^{-A0 t} + (A1/A0) |M1v(0)|^2 (1 - e^{-A0 t})``.

    Returns ``(ok, margin)`` where ``margin`` is the smallest signed distance
    between the recorded total energy and the bound over all samples.  With
    no collisions both rates vanish and the bound degenerates to
    ``M2(0)``, which a constant-energy run meets with equality.
    """
    if not history:
        raise ParameterError("empty history")
    t0 = history[0].t
    e0 = history[0].total_energy
    p0 = np.hypot(*history[0].momentum)
    a0 = constants.decay_rate
    a1 = constants.source_rate
    t = np.array([rec.t - t0 for rec in history])
    energy = np.array([rec.total_energy for rec in history])
    if a0 > 0.0:
        bound = e0 * np.exp(-a0 * t) + (a1 / a0) * p0**2 * (1.0 - np.exp(-a0 * t))
    else:
        bound = np.full_like(t, e0)
    margin = float(np.min(energy - bound))
    return margin >= -rel_tol * max(e0, 1.0), margin
