"""Multiscale sea-ice floe dynamics: particle, continuum and coarse-graining."""

__version__ = "0.1.0"

from .core import (
    CflError,
    Domain,
    FloeParams,
    FloesimError,
    FloeState,
    IntegrationDivergedError,
    MaterialParams,
    OceanField,
    PackingError,
    ParameterError,
    SingularConfigurationError,
    effective_moduli,
    min_image_displacement,
    restitution_damping,
)
from .contact import ContactPair, contact_duration, g_ratio, pair_force_torque, resolve_geometry, stiffnesses
from .particle import (
    DragCoefficients,
    ParticleSystem,
    drag_coeffs,
    init_lattice,
    init_nonoverlapping,
    neighbor_pairs,
    sample_powerlaw_radii,
    step_euler,
    total_force_torque,
)
from .diagnostics import MomentRecord, balance_residuals, groenwall_bound_check, moments, pair_strain_energy
from .hydro import GridFields, HydroConfig, HydroGrid, continuum_drag_from_particles, hydro_energy, hydro_step
from .coarsegrain import CellFields, bin_particles, l2_discrepancy
