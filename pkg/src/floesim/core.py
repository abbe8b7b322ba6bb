"""Shared domain types: periodic domain geometry, floe parameters, material
constants and the ocean surface velocity field.

Everything in this module is an immutable value type; instances can be shared
freely between threads.  Positions live in a rectangular domain that may be
periodic per axis; all pairwise geometry uses the minimum-image convention so
that contacts are detected across periodic boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class FloesimError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FloesimError, ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class SingularConfigurationError(FloesimError):
    """Two floe centers coincide; the contact normal is undefined."""


class PackingError(FloesimError):
    """Rejection sampling failed to place all floes without overlap."""

    def __init__(self, placed: int, requested: int, max_attempts: int):
        self.placed = placed
        self.requested = requested
        super().__init__(
            f"placed {placed}/{requested} floes without overlap "
            f"(gave up after {max_attempts} attempts per floe)"
        )


class IntegrationDivergedError(FloesimError):
    """A state component became NaN/Inf during time integration."""

    def __init__(self, floe_index: int, time: float):
        self.floe_index = floe_index
        self.time = time
        super().__init__(f"non-finite state for floe {floe_index} at t={time:g}")


class CflError(FloesimError):
    """Explicit step rejected because the advective CFL bound was exceeded."""

    def __init__(self, dt: float, suggested_dt: float):
        self.dt = dt
        self.suggested_dt = suggested_dt
        super().__init__(f"CFL violation: dt={dt:g}, suggested dt <= {suggested_dt:g}")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangular domain, optionally periodic per axis.

    Attributes
    ----------
    lower, upper:
        Corner coordinates, ``upper > lower`` componentwise.
    periodic:
        Per-axis periodicity flags.  On periodic axes all stored positions
        lie in ``[lower, upper)``.
    """

    lower: tuple[float, float]
    upper: tuple[float, float]
    periodic: tuple[bool, bool] = (True, True)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (2,) or hi.shape != (2,):
            raise ParameterError("domain corners must be 2-vectors")
        if not np.all(hi > lo):
            raise ParameterError(f"domain upper {self.upper} must exceed lower {self.lower}")
        object.__setattr__(self, "lower", (float(lo[0]), float(lo[1])))
        object.__setattr__(self, "upper", (float(hi[0]), float(hi[1])))
        object.__setattr__(self, "periodic", (bool(self.periodic[0]), bool(self.periodic[1])))

    @classmethod
    def square(cls, half_width: float = math.pi, periodic: bool = True) -> "Domain":
        """Centered square ``[-half_width, half_width]^2`` (paper-style box)."""
        return cls(
            lower=(-half_width, -half_width),
            upper=(half_width, half_width),
            periodic=(periodic, periodic),
        )

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def area(self) -> float:
        return float(np.prod(self.lengths))

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map positions into ``[lower, upper)`` on periodic axes.

        Non-periodic axes are returned unchanged (free space).
        """
        x = np.asarray(x, dtype=float)
        out = x.copy()
        lo = np.asarray(self.lower)
        lengths = self.lengths
        for axis in range(2):
            if self.periodic[axis]:
                out[..., axis] = lo[axis] + np.mod(x[..., axis] - lo[axis], lengths[axis])
        return out

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((x >= lo) & (x < hi), axis=-1)


def min_image_displacement(a: np.ndarray, b: np.ndarray, domain: Domain) -> np.ndarray:
    """Displacement ``b - a`` under the minimum-image convention.

    On periodic axes the result is shifted by an integer number of periods so
    each component has magnitude at most half the box length.  Exactly
    antisymmetric: ``min_image_displacement(a, b) == -min_image_displacement(b, a)``
    bit for bit (the half-period tie is resolved by round-half-even, which is
    an odd function).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    out = d.copy()
    lengths = domain.lengths
    for axis in range(2):
        if domain.periodic[axis]:
            box = lengths[axis]
            out[..., axis] = d[..., axis] - box * np.round(d[..., axis] / box)
    return out


@dataclass(frozen=True)
class FloeParams:
    """Geometry and mass of one cylindrical floe.

    Mass, inertia and draft are derived quantities and are always recomputed
    from ``(radius, thickness, ice_density)``; they are never stored
    independently, so ``m = rho_ice * pi * r^2 * h`` and ``I = m r^2`` hold to
    machine precision by construction.  The draft (submerged depth) defaults
    to 90% of the thickness.
    """

    radius: float
    thickness: float
    ice_density: float = 1.0
    draft_ratio: float = 0.9

    def __post_init__(self):
        if self.radius <= 0 or self.thickness <= 0:
            raise ParameterError(
                f"radius and thickness must be positive, got r={self.radius}, h={self.thickness}"
            )
        if self.ice_density <= 0:
            raise ParameterError(f"ice density must be positive, got {self.ice_density}")

    @property
    def mass(self) -> float:
        return self.ice_density * math.pi * self.radius**2 * self.thickness

    @property
    def inertia(self) -> float:
        return self.mass * self.radius**2

    @property
    def draft(self) -> float:
        return self.draft_ratio * self.thickness


@dataclass(frozen=True)
class FloeState:
    """Kinematic state of one floe.

    ``position`` is the wrapped position used for contact search;
    ``position_unwrapped`` accumulates the raw trajectory and is used for
    orbital angular momentum, which would be discontinuous under wrapping.
    The orientation is kept in ``[0, 2*pi)``; it enters no force law.
    """

    position: tuple[float, float]
    velocity: tuple[float, float]
    orientation: float = 0.0
    spin: float = 0.0
    position_unwrapped: tuple[float, float] | None = None

    def __post_init__(self):
        if self.position_unwrapped is None:
            object.__setattr__(self, "position_unwrapped", tuple(self.position))


def effective_moduli(youngs_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    """Effective contact moduli of two identical elastic plates.

    Returns ``(E_e, G_e)`` with ``E_e = E / (2 (1 - nu^2))`` and
    ``G_e = E / (4 (2 + nu) (1 - nu))``.
    """
    E, nu = youngs_modulus, poisson_ratio
    if E <= 0:
        raise ParameterError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 1.0:
        raise ParameterError(f"Poisson ratio must lie in (-1, 1), got {nu}")
    e_eff = E / (2.0 * (1.0 - nu**2))
    g_eff = E / (4.0 * (2.0 + nu) * (1.0 - nu))
    return e_eff, g_eff


def restitution_damping(restitution: float) -> float:
    """Velocity-damping factor derived from the restitution coefficient.

    ``eta = ln(e_r) / sqrt(ln(e_r)^2 + pi^2)``, strictly inside ``(-1, 0)``
    for ``e_r`` in ``(0, 1)``.  The perfectly inelastic limit ``e_r = 0`` is
    approached but excluded (the logarithm diverges there), as is the
    perfectly elastic ``e_r = 1``.
    """
    if not 0.0 < restitution < 1.0:
        raise ParameterError(
            f"restitution coefficient must lie strictly in (0, 1), got {restitution}"
        )
    log_e = math.log(restitution)
    return log_e / math.sqrt(log_e**2 + math.pi**2)


@dataclass(frozen=True)
class MaterialParams:
    """Global physical constants shared by all floes.

    Defaults reproduce the reference experiment: unit ice and ocean density,
    stiff plates (``E = 1e4``, ``nu = 0.7``), strongly inelastic collisions
    (``e_r = 0.15``) and moderate friction (``mu = 0.2``).

    ``v_star`` regularizes the contact-duration formula as the relative speed
    vanishes and ``t_c_max`` caps the duration outright; both are applied so
    the energy lower-bound estimate holds unconditionally.
    """

    ice_density: float = 1.0
    youngs_modulus: float = 1.0e4
    poisson_ratio: float = 0.7
    restitution: float = 0.15
    friction: float = 0.2
    ocean_density: float = 1.0
    drag_vertical: float = 2.0
    drag_horizontal: float = 4.0
    v_star: float = 1.0e-6
    t_c_max: float = 1.0e-2

    def __post_init__(self):
        if self.ice_density <= 0:
            raise ParameterError("ice density must be positive")
        if not 0.0 < self.restitution < 1.0:
            raise ParameterError(
                f"restitution must lie in (0, 1); the inelastic limit e_r=0 is "
                f"approached but not admissible (got {self.restitution})"
            )
        if self.friction < 0:
            raise ParameterError("friction coefficient must be non-negative")
        if self.v_star <= 0 or self.t_c_max <= 0:
            raise ParameterError("v_star and t_c_max must be positive")
        if self.ocean_density < 0 or self.drag_vertical < 0 or self.drag_horizontal < 0:
            raise ParameterError("ocean density and drag coefficients must be non-negative")
        # validate moduli inputs eagerly so construction fails fast
        effective_moduli(self.youngs_modulus, self.poisson_ratio)

    @cached_property
    def contact_modulus(self) -> float:
        """Effective normal contact modulus E_e."""
        return effective_moduli(self.youngs_modulus, self.poisson_ratio)[0]

    @cached_property
    def shear_modulus(self) -> float:
        """Effective tangential contact modulus G_e."""
        return effective_moduli(self.youngs_modulus, self.poisson_ratio)[1]

    @cached_property
    def damping_factor(self) -> float:
        """Restitution damping factor (negative for any admissible e_r)."""
        return restitution_damping(self.restitution)

    def without_drag(self) -> "MaterialParams":
        """Copy with ocean drag disabled (alpha = beta = 0 for every floe)."""
        return MaterialParams(
            ice_density=self.ice_density,
            youngs_modulus=self.youngs_modulus,
            poisson_ratio=self.poisson_ratio,
            restitution=self.restitution,
            friction=self.friction,
            ocean_density=0.0,
            drag_vertical=0.0,
            drag_horizontal=0.0,
            v_star=self.v_star,
            t_c_max=self.t_c_max,
        )


class OceanField:
    """Prescribed ocean surface velocity ``u_o(x)`` and its curl.

    Three variants are supported:

    - ``constant``: uniform velocity, zero curl;
    - ``rotational_example``: the smooth rotational benchmark flow
      ``u_o(x, y) = (-y s, x s)`` with
      ``s = (x^2 + y^2 - 4)/32 * exp(-(x^2+y^2)(x^2+y^2-8)/8)``;
    - ``sampled``: nodal velocities on a uniform periodic grid with bilinear
      interpolation; curl by central differences on the grid.
    """

    def __init__(self, kind: str, **kwargs):
        if kind not in ("constant", "rotational_example", "sampled"):
            raise ParameterError(f"unknown ocean field variant {kind!r}")
        self.kind = kind
        self._u0 = None
        if kind == "constant":
            u0 = np.asarray(kwargs["u0"], dtype=float)
            if u0.shape != (2,):
                raise ParameterError("constant ocean velocity must be a 2-vector")
            self._u0 = u0
        elif kind == "sampled":
            self._domain: Domain = kwargs["domain"]
            u_nodes = np.asarray(kwargs["u_nodes"], dtype=float)
            if u_nodes.ndim != 3 or u_nodes.shape[2] != 2:
                raise ParameterError("sampled ocean velocities must have shape (nx, ny, 2)")
            self._u_nodes = u_nodes
            self._curl_nodes = self._central_difference_curl(u_nodes, self._domain)

    @classmethod
    def constant(cls, u0) -> "OceanField":
        return cls("constant", u0=u0)

    @classmethod
    def rotational_example(cls) -> "OceanField":
        return cls("rotational_example")

    @classmethod
    def sampled(cls, domain: Domain, u_nodes) -> "OceanField":
        return cls("sampled", domain=domain, u_nodes=u_nodes)

    @staticmethod
    def _central_difference_curl(u_nodes: np.ndarray, domain: Domain) -> np.ndarray:
        nx, ny = u_nodes.shape[:2]
        hx, hy = domain.lengths / (nx, ny)
        ux, uy = u_nodes[..., 0], u_nodes[..., 1]
        duy_dx = (np.roll(uy, -1, axis=0) - np.roll(uy, 1, axis=0)) / (2.0 * hx)
        dux_dy = (np.roll(ux, -1, axis=1) - np.roll(ux, 1, axis=1)) / (2.0 * hy)
        return duy_dx - dux_dy

    def _bilinear(self, values: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Periodic bilinear interpolation of nodal values at positions x."""
        nx, ny = values.shape[:2]
        lo = np.asarray(self._domain.lower)
        hx, hy = self._domain.lengths / (nx, ny)
        fx = (x[..., 0] - lo[0]) / hx
        fy = (x[..., 1] - lo[1]) / hy
        i0 = np.floor(fx).astype(int)
        j0 = np.floor(fy).astype(int)
        tx = fx - i0
        ty = fy - j0
        i0 = np.mod(i0, nx)
        j0 = np.mod(j0, ny)
        i1 = np.mod(i0 + 1, nx)
        j1 = np.mod(j0 + 1, ny)
        if values.ndim == 3:
            tx = tx[..., None]
            ty = ty[..., None]
        return (
            values[i0, j0] * (1 - tx) * (1 - ty)
            + values[i1, j0] * tx * (1 - ty)
            + values[i0, j1] * (1 - tx) * ty
            + values[i1, j1] * tx * ty
        )

    def velocity(self, x: np.ndarray) -> np.ndarray:
        """Ocean velocity at positions ``x`` of shape ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self._u0, x.shape).copy()
        if self.kind == "rotational_example":
            q = x[..., 0] ** 2 + x[..., 1] ** 2
            s = (q - 4.0) / 32.0 * np.exp(-q * (q - 8.0) / 8.0)
            return np.stack([-x[..., 1] * s, x[..., 0] * s], axis=-1)
        return self._bilinear(self._u_nodes, x)

    def curl(self, x: np.ndarray) -> np.ndarray:
        """Scalar curl (vorticity) of the ocean velocity at positions ``x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros(x.shape[:-1])
        if self.kind == "rotational_example":
            # With s = s(q), q = x^2 + y^2: curl = 2 s + 2 q s'(q), where
            # s'(q) = exp(-q(q-8)/8) * (1 - (q-4)^2/4) / 32.
            q = x[..., 0] ** 2 + x[..., 1] ** 2
            expo = np.exp(-q * (q - 8.0) / 8.0)
            s = (q - 4.0) / 32.0 * expo
            s_prime = expo * (1.0 - 0.25 * (q - 4.0) ** 2) / 32.0
            return 2.0 * s + 2.0 * q * s_prime
        return self._bilinear(self._curl_nodes, x)
