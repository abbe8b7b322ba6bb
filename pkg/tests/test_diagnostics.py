"""Moments, balance residuals and the energy lower bound."""

import math

import numpy as np
import pytest

from floesim import (
    Domain,
    MaterialParams,
    OceanField,
    ParameterError,
    ParticleSystem,
    balance_residuals,
    moments,
    pair_strain_energy,
)
from floesim.diagnostics import EnergyBoundConstants, groenwall_bound_check
from floesim.runner import run_particle_simulation
from floesim.validate import (
    binary_collision_system,
    collision_test_system,
    drag_free_run,
    energy_tolerance,
)

DOMAIN = Domain.square(math.pi)
MATERIALS = MaterialParams()


def strain_oracle(overlap, h_eff, r_eff, materials, levels=22, tol=1e-12):
    """Adaptive Richardson-extrapolated trapezoid rule, independent of the
    library quadrature."""

    def integrand(s):
        xi = s * r_eff / (2 * h_eff**2)
        g = (0.9117 * xi**2 - 0.2722 * xi + 0.003324) / (xi**2 - 1.524 * xi + 0.03159)
        return math.pi * materials.contact_modulus * h_eff * g * s

    a, b = overlap, 0.0
    table = [[0.5 * (b - a) * (integrand(np.asarray(a)) + integrand(np.asarray(b)))]]
    n = 1
    for level in range(1, levels):
        n *= 2
        xs = a + (b - a) * (np.arange(1, n, 2) / n)
        trap = 0.5 * table[-1][0] + (b - a) / n * integrand(xs).sum()
        row = [trap]
        for m, prev in enumerate(table[-1], start=1):
            row.append(row[-1] + (row[-1] - prev) / (4**m - 1))
        table.append(row)
        if level > 3 and abs(table[-1][-1] - table[-2][-1]) <= tol * abs(table[-1][-1]):
            break
    return -table[-1][-1]


class TestPairStrainEnergy:
    def test_zero_at_touching(self):
        assert pair_strain_energy(0.0, 1.0, 0.1, MATERIALS) == 0.0

    def test_constant_stiffness_limit_is_quadratic(self):
        # r_eff -> 0 freezes the stiffness at its zero-overlap value, so the
        # integral collapses to k1(0) * overlap^2 / 2.
        delta = -0.05
        k1_const = math.pi * MATERIALS.contact_modulus * 1.0 * (0.003324 / 0.03159)
        got = pair_strain_energy(delta, 1.0, 1e-14, MATERIALS)
        assert got == pytest.approx(0.5 * k1_const * delta**2, rel=1e-12)

    def test_matches_adaptive_oracle(self):
        expected = strain_oracle(-0.01, 1.0, 0.1, MATERIALS)
        assert pair_strain_energy(-0.01, 1.0, 0.1, MATERIALS) == pytest.approx(expected, rel=1e-10)

    def test_matches_oracle_on_extreme_overlaps(self):
        # overlaps far beyond the simulated regime; the fixed 16-node rule
        # stays within a few 1e-9 relative even there
        rng = np.random.default_rng(21)
        for _ in range(25):
            delta = -rng.uniform(1e-4, 0.3)
            h_eff = rng.uniform(0.3, 2.0)
            r_eff = rng.uniform(0.02, 0.5)
            expected = strain_oracle(delta, h_eff, r_eff, MATERIALS)
            got = pair_strain_energy(delta, h_eff, r_eff, MATERIALS)
            assert got == pytest.approx(expected, rel=2e-8)
            assert got >= 0.0

    def test_positive_overlap_rejected(self):
        with pytest.raises(ParameterError):
            pair_strain_energy(0.1, 1.0, 0.1, MATERIALS)


class TestMoments:
    def test_single_floe_reference(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS,
            ocean=OceanField.constant((0.0, 0.0)),
            radius=[1.0],
            thickness=[2.0 / math.pi],
            positions=[[0.0, 0.0]],
            velocities=[[1.0, 0.0]],
        )
        rec = moments(system)
        assert rec.total_mass == pytest.approx(2.0, rel=1e-15)
        assert rec.momentum == pytest.approx((2.0, 0.0), rel=1e-15)
        assert rec.angular_momentum == 0.0
        assert rec.kinetic_translational == pytest.approx(1.0, rel=1e-15)
        assert rec.kinetic_rotational == 0.0

    def test_no_contacts_zero_contact_terms(self):
        rng = np.random.default_rng(22)
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS,
            ocean=OceanField.constant((0.0, 0.0)),
            radius=np.full(10, 0.05),
            thickness=1.0,
            positions=np.stack(
                [np.linspace(-3, 3, 10), np.zeros(10)], axis=1
            ),
            velocities=rng.normal(0, 0.3, (10, 2)),
        )
        rec = moments(system)
        assert rec.strain_energy == 0.0
        assert rec.dissipation_normal == 0.0 and rec.dissipation_tangential == 0.0
        assert rec.strain_peak == 0.0

    def test_drift_state_kinetic_energy(self):
        rng = np.random.default_rng(23)
        n = 30
        u0 = np.array([0.3, 0.0])
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS,
            ocean=OceanField.constant(u0),
            radius=rng.uniform(0.08, 0.32, n),
            thickness=rng.uniform(0.5, 2.0, n),
            positions=rng.uniform(-3, 3, (n, 2)),
            velocities=np.tile(u0, (n, 1)),
        )
        rec = moments(system)
        assert rec.kinetic_translational == pytest.approx(
            0.5 * float(np.sum(system.mass)) * 0.09, rel=1e-14
        )

    def test_energy_components_sum_exactly(self):
        run = drag_free_run(24, dt=1e-3, t_final=0.05)
        for rec in run.moments:
            assert rec.total_energy == rec.strain_energy + rec.kinetic_translational + rec.kinetic_rotational
            assert rec.strain_energy >= 0.0
            assert rec.dissipation_normal <= 0.0
            assert rec.dissipation_tangential <= 0.0


class TestBalanceResiduals:
    def test_needs_three_samples(self):
        run = drag_free_run(25, dt=1e-3, t_final=0.002)
        with pytest.raises(ParameterError):
            balance_residuals(run.moments[:2], 1e-3)

    def test_free_flight_residuals_vanish(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS.without_drag(),
            ocean=OceanField.constant((0.0, 0.0)),
            radius=[0.05, 0.05],
            thickness=1.0,
            positions=[[-2.0, 0.0], [2.0, 0.0]],
            velocities=[[0.1, 0.0], [0.0, 0.1]],
        )
        run = run_particle_simulation(system, dt=1e-3, n_steps=50, sample_stride=1)
        res = balance_residuals(run.moments, 1e-3)
        assert res["momentum"]["max"] <= 1e-12
        assert res["energy"]["max"] <= 1e-12

    def _drag_run(self, dt):
        rng = np.random.default_rng(77)
        n = 10
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(t_c_max=10 * dt),
            ocean=OceanField.constant((0.3, 0.0)),
            radius=rng.uniform(0.2, 0.4, n),
            thickness=rng.uniform(0.5, 2.0, n),
            positions=rng.uniform(-math.pi, math.pi, (n, 2)),
            velocities=rng.normal(0.0, 0.5, (n, 2)),
            omega=rng.normal(0.0, 0.5, n),
        )
        return run_particle_simulation(system, dt=dt, n_steps=int(round(0.2 / dt)), sample_stride=1)

    def test_first_order_convergence_with_drag(self):
        res = balance_residuals(self._drag_run(1e-3).moments, 1e-3)
        res_half = balance_residuals(self._drag_run(5e-4).moments, 5e-4)
        assert res_half["momentum"]["rms"] < res["momentum"]["rms"] / 1.5
        assert res_half["energy"]["rms"] < res["energy"]["rms"] / 1.5

    def test_angular_balance_free_space(self):
        system = binary_collision_system(dt=1e-4, periodic=False)
        run = run_particle_simulation(system, dt=1e-4, n_steps=5000, sample_stride=1)
        res = balance_residuals(run.moments, 1e-4)
        angular = np.array([rec.angular_momentum for rec in run.moments])
        scale = max(abs(angular).max(), 1.0)
        # drag-free: angular momentum conserved up to the torque-point
        # approximation, which is quadratic in the (small) overlaps
        assert res["angular"]["max"] <= 2e-2 * scale
        drift = abs(angular - angular[0]).max()
        assert drift <= 1e-3 * scale


class TestGroenwallBound:
    def test_no_collision_run_meets_degenerate_bound(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS.without_drag(),
            ocean=OceanField.constant((0.0, 0.0)),
            radius=[0.05, 0.05],
            thickness=1.0,
            positions=[[-2.0, 0.0], [2.0, 0.0]],
            velocities=[[0.1, 0.0], [-0.1, 0.0]],
        )
        run = run_particle_simulation(system, dt=1e-3, n_steps=200, sample_stride=1, track_extremes=True)
        constants = EnergyBoundConstants.from_run(run.final_system, run.extremes)
        assert constants.decay_rate == 0.0
        ok, margin = groenwall_bound_check(run.moments, constants)
        assert ok and margin >= -1e-12

    def test_binary_collision_bound_holds(self):
        run = run_particle_simulation(
            binary_collision_system(dt=1e-4), dt=1e-4, n_steps=10_000, sample_stride=10,
            track_extremes=True,
        )
        assert run.extremes["k_damp_max"] > 0, "collision must occur"
        constants = EnergyBoundConstants.from_run(run.final_system, run.extremes)
        ok, margin = groenwall_bound_check(run.moments, constants)
        assert ok

    def test_multi_collision_bound_holds(self):
        run = drag_free_run(26, dt=1e-4, t_final=0.5)
        constants = EnergyBoundConstants.from_run(run.final_system, run.extremes)
        ok, margin = groenwall_bound_check(run.moments, constants)
        assert ok

    def test_rejects_drag(self):
        rng = np.random.default_rng(27)
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MATERIALS,
            ocean=OceanField.constant((0.3, 0.0)),
            radius=[0.1],
            thickness=1.0,
            positions=[[0.0, 0.0]],
        )
        with pytest.raises(ParameterError):
            EnergyBoundConstants.from_run(system, {})


class TestConservationAndTrends:
    def test_momentum_conserved_without_drag(self):
        run = drag_free_run(28, dt=1e-4, t_final=0.5)
        p0 = np.asarray(run.moments[0].momentum)
        drift = max(np.hypot(*(np.asarray(r.momentum) - p0)) for r in run.moments)
        assert drift <= 1e-12 * max(np.hypot(*p0), 1.0)

    def test_energy_monotone_within_integrator_tolerance(self):
        dt = 1e-4
        run = drag_free_run(29, dt=dt, t_final=0.5)
        tol = energy_tolerance(run, dt)
        energy = np.array([r.total_energy for r in run.moments])
        assert float(np.diff(energy).max(initial=0.0)) <= tol

    def test_relaxation_trend_toward_constant_ocean(self):
        rng = np.random.default_rng(30)
        n = 10
        u0 = np.array([0.3, 0.0])
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(t_c_max=1e-2),
            ocean=OceanField.constant(u0),
            radius=rng.uniform(0.08, 0.32, n),
            thickness=rng.uniform(0.5, 2.0, n),
            positions=rng.uniform(-math.pi, math.pi, (n, 2)),
            velocities=rng.normal(0.2, 0.2, (n, 2)),
            omega=rng.normal(0.1, 0.3, n),
        )

        def mean_mismatch(s):
            rel = s.v - u0
            return float(np.mean(np.hypot(rel[:, 0], rel[:, 1]))), float(np.mean(np.abs(s.omega)))

        half = run_particle_simulation(system, dt=1e-3, n_steps=500, sample_stride=500)
        full = run_particle_simulation(half.final_system, dt=1e-3, n_steps=500, sample_stride=500)
        v_half, w_half = mean_mismatch(half.final_system)
        v_full, w_full = mean_mismatch(full.final_system)
        assert v_full < v_half
        assert w_full < w_half
