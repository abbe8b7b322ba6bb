"""Pairwise contact resolution: Hertz-type normal force, Coulomb-capped
tangential friction, and the resulting torques on both floes.

Two disks ``i`` and ``j`` are in contact when their overlap
``delta = d - (r_i + r_j)`` is strictly negative (``d`` is the minimum-image
center distance).  The normal stiffness is the nonlinear Hertz law

    k1 = pi * E_e * h_e * g(delta * r_e / (2 h_e^2)),

with ``g`` a rational fit that stays positive for non-positive arguments, and
the derived damping and tangential stiffnesses

    k2 = eta * sqrt(5 k1 m_e)   (< 0: dissipative),
    k3 = 6 (G_e / E_e) * k1.

Tangential shear is accumulated over an approximate contact duration
``t_c = 2.94 (m_e / k1)^{2/5} (|dv| + v_star)^{-1/5}`` (capped at ``t_c_max``)
instead of integrating a per-contact history, so pair evaluation is stateless.
All functions here are pure and trivially parallelizable over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Domain,
    FloeParams,
    FloeState,
    MaterialParams,
    ParameterError,
    SingularConfigurationError,
    min_image_displacement,
)

#: Coefficients of the rational overlap correction g(xi); numerator over
#: denominator, highest degree first.
G_NUM = (0.9117, -0.2722, 0.003324)
G_DEN = (1.0, -1.524, 0.03159)

#: Prefactor of the approximate contact duration.
CONTACT_TIME_COEFF = 2.94


@dataclass(frozen=True)
class ContactPair:
    """One resolved floe pair.

    ``normal`` points from floe ``i`` to floe ``j``; ``tangent`` is ``normal``
    rotated counterclockwise by 90 degrees, so ``normal x tangent = +1``.
    Forces are those exerted *on floe i*; the pair is antisymmetric, so floe
    ``j`` receives the exact negations.  Torques are scalar z-components and
    are *not* antisymmetric: both floes are torqued by the same tangential
    force acting at the shared contact point.
    """

    i: int
    j: int
    overlap: float
    distance: float
    normal: tuple[float, float]
    tangent: tuple[float, float]
    h_eff: float
    r_eff: float
    m_eff: float
    k_elastic: float = 0.0
    k_damp: float = 0.0
    k_tangent: float = 0.0
    t_contact: float = 0.0
    slip_rate: float = 0.0
    shear: float = 0.0
    coulomb: float = 1.0
    f_normal: tuple[float, float] = (0.0, 0.0)
    f_tangent: tuple[float, float] = (0.0, 0.0)
    torque_i: float = 0.0
    torque_j: float = 0.0

    @property
    def in_contact(self) -> bool:
        return self.overlap < 0.0


def g_ratio(xi: float) -> float:
    """Rational Hertz correction ``g(xi)`` for non-positive arguments.

    ``g(xi) = (0.9117 xi^2 - 0.2722 xi + 0.003324) /
    (xi^2 - 1.524 xi + 0.03159)``; positive for ``xi <= 0``.  Arguments above
    zero are rejected: the denominator has two positive real roots (near
    0.021 and 1.503) and the physical regime only ever reaches ``xi <= 0``.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi > 0.0):
        raise ParameterError(f"g_ratio requires xi <= 0, got {xi}")
    num = (G_NUM[0] * xi + G_NUM[1]) * xi + G_NUM[2]
    den = (G_DEN[0] * xi + G_DEN[1]) * xi + G_DEN[2]
    return num / den if xi.ndim else float(num / den)


def resolve_geometry(
    state_i: FloeState,
    state_j: FloeState,
    params_i: FloeParams,
    params_j: FloeParams,
    domain: Domain,
    i: int = 0,
    j: int = 1,
) -> ContactPair:
    """Geometric part of a contact pair: overlap, frame and effective sizes.

    The effective thickness is the smaller of the two, the effective radius
    and mass are the harmonic combinations ``r_i r_j / (r_i + r_j)`` and
    ``m_i m_j / (m_i + m_j)``.
    """
    if i == j:
        raise ParameterError("self-pairs are skipped; i must differ from j")
    disp = min_image_displacement(state_i.position, state_j.position, domain)
    dist = float(np.hypot(disp[0], disp[1]))
    if dist == 0.0:
        raise SingularConfigurationError(f"floes {i} and {j} have coincident centers")
    normal = disp / dist
    tangent = np.array([-normal[1], normal[0]])
    return ContactPair(
        i=i,
        j=j,
        overlap=dist - (params_i.radius + params_j.radius),
        distance=dist,
        normal=(float(normal[0]), float(normal[1])),
        tangent=(float(tangent[0]), float(tangent[1])),
        h_eff=min(params_i.thickness, params_j.thickness),
        r_eff=params_i.radius * params_j.radius / (params_i.radius + params_j.radius),
        m_eff=params_i.mass * params_j.mass / (params_i.mass + params_j.mass),
    )


def stiffnesses(
    overlap: float,
    h_eff: float,
    r_eff: float,
    m_eff: float,
    materials: MaterialParams,
) -> tuple[float, float, float]:
    """Contact stiffnesses ``(k1, k2, k3)``; all zero outside contact."""
    if overlap >= 0.0:
        return 0.0, 0.0, 0.0
    xi = overlap * r_eff / (2.0 * h_eff**2)
    k1 = np.pi * materials.contact_modulus * h_eff * g_ratio(xi)
    k2 = materials.damping_factor * np.sqrt(5.0 * k1 * m_eff)
    k3 = 6.0 * (materials.shear_modulus / materials.contact_modulus) * k1
    return float(k1), float(k2), float(k3)


def contact_duration(
    m_eff: float,
    k_elastic: float,
    rel_speed: float,
    materials: MaterialParams,
) -> float:
    """Approximate contact duration, regularized and capped.

    ``t_c = min(t_c_max, 2.94 (m_e/k1)^{2/5} (|dv| + v_star)^{-1/5})``.  The
    ``v_star`` shift removes the singularity as the relative speed vanishes;
    the cap keeps the duration uniformly bounded.
    """
    if k_elastic <= 0.0:
        raise ParameterError("contact_duration requires a positive elastic stiffness")
    raw = (
        CONTACT_TIME_COEFF
        * (m_eff / k_elastic) ** 0.4
        * (rel_speed + materials.v_star) ** -0.2
    )
    return float(min(materials.t_c_max, raw))


def pair_force_torque(
    state_i: FloeState,
    state_j: FloeState,
    params_i: FloeParams,
    params_j: FloeParams,
    materials: MaterialParams,
    domain: Domain,
    i: int = 0,
    j: int = 1,
) -> ContactPair:
    """Complete contact resolution for one pair.

    Outside contact all forces and torques are zero (and the Coulomb scale is
    reported as 1).  In contact:

    - normal force ``(k1 delta + k2 (v_i - v_j) . n) n`` on floe i,
    - slip rate ``sigma_t = (v_j - v_i) . t - r_j w_j - r_i w_i`` and shear
      ``sigma = t_c sigma_t``,
    - raw tangential force ``k3 sigma t``, scaled by
      ``zeta = min(1, mu |f_n| / |f_t~|)`` so the Coulomb bound
      ``|f_t| <= mu |f_n|`` always holds,
    - torques ``r_i (n x f_t)`` and ``r_j (n x f_t)`` on floes i and j: both
      floes are driven by the same tangential force at the shared contact
      point (the reaction pair uses ``-n`` and ``-f_t``, whose cross product
      is the same scalar).
    """
    pair = resolve_geometry(state_i, state_j, params_i, params_j, domain, i=i, j=j)
    if pair.overlap >= 0.0:
        return pair

    k1, k2, k3 = stiffnesses(pair.overlap, pair.h_eff, pair.r_eff, pair.m_eff, materials)
    v_i = np.asarray(state_i.velocity)
    v_j = np.asarray(state_j.velocity)
    dv = v_i - v_j
    rel_speed = float(np.hypot(dv[0], dv[1]))
    t_c = contact_duration(pair.m_eff, k1, rel_speed, materials)

    normal = np.asarray(pair.normal)
    tangent = np.asarray(pair.tangent)
    approach = float(dv @ normal)
    f_normal = (k1 * pair.overlap + k2 * approach) * normal

    slip_rate = (
        float((v_j - v_i) @ tangent)
        - params_j.radius * state_j.spin
        - params_i.radius * state_i.spin
    )
    shear = t_c * slip_rate
    f_tangent_raw = k3 * shear * tangent
    fn_mag = float(np.hypot(f_normal[0], f_normal[1]))
    ft_mag = float(np.hypot(f_tangent_raw[0], f_tangent_raw[1]))
    if ft_mag <= materials.friction * fn_mag:
        coulomb = 1.0
    else:
        coulomb = materials.friction * fn_mag / ft_mag
    f_tangent = coulomb * f_tangent_raw

    # scalar z-component of n x f_t, shared by both torques
    cross = float(normal[0] * f_tangent[1] - normal[1] * f_tangent[0])
    return ContactPair(
        i=pair.i,
        j=pair.j,
        overlap=pair.overlap,
        distance=pair.distance,
        normal=pair.normal,
        tangent=pair.tangent,
        h_eff=pair.h_eff,
        r_eff=pair.r_eff,
        m_eff=pair.m_eff,
        k_elastic=k1,
        k_damp=k2,
        k_tangent=k3,
        t_contact=t_c,
        slip_rate=slip_rate,
        shear=shear,
        coulomb=coulomb,
        f_normal=(float(f_normal[0]), float(f_normal[1])),
        f_tangent=(float(f_tangent[0]), float(f_tangent[1])),
        torque_i=params_i.radius * cross,
        torque_j=params_j.radius * cross,
    )
