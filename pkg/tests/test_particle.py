"""Particle assembly: drag, neighbor search, totals, stepping, sampling."""

import math

import numpy as np
import pytest

from floesim import (
    Domain,
    FloeParams,
    MaterialParams,
    OceanField,
    PackingError,
    ParameterError,
    ParticleSystem,
    drag_coeffs,
    init_lattice,
    init_nonoverlapping,
    neighbor_pairs,
    sample_powerlaw_radii,
    step_euler,
    total_force_torque,
)
from floesim.contact import pair_force_torque
from floesim.particle import brute_force_pairs, contact_pairs, pair_contact_arrays

DOMAIN = Domain.square(math.pi)
STILL_OCEAN = OceanField.constant((0.0, 0.0))


def random_system(rng, n, domain=DOMAIN, materials=None, r_range=(0.05, 0.3), v_std=0.5):
    materials = materials or MaterialParams()
    return ParticleSystem.create(
        domain=domain,
        materials=materials,
        ocean=STILL_OCEAN,
        radius=rng.uniform(*r_range, size=n),
        thickness=rng.uniform(0.5, 2.0, size=n),
        positions=rng.uniform(-math.pi, math.pi, size=(n, 2)),
        velocities=rng.normal(0.0, v_std, size=(n, 2)),
        omega=rng.normal(0.0, 0.5, size=n),
    )


class TestDragCoeffs:
    def test_reference_floe(self):
        p = FloeParams(radius=0.02, thickness=1.0)
        dc = drag_coeffs(p, MaterialParams())
        assert dc.alpha == pytest.approx(math.pi * (2 * 2 * 0.02 * 0.9 + 4 * 0.02**2), rel=1e-14)
        assert dc.beta == pytest.approx(
            math.pi * 0.02**4 * (2 * 0.9 + 0.02 * 4 / 5), rel=1e-14
        )

    def test_vanishing_floe(self):
        p = FloeParams(radius=1e-9, thickness=1.0)
        dc = drag_coeffs(p, MaterialParams())
        assert dc.alpha < 1e-7 and dc.beta < 1e-30

    def test_system_arrays_match_scalar(self):
        rng = np.random.default_rng(0)
        system = random_system(rng, 20)
        for i in range(system.n):
            dc = drag_coeffs(system.floe_params(i), system.materials)
            assert system.alpha[i] == pytest.approx(dc.alpha, rel=1e-14)
            assert system.beta[i] == pytest.approx(dc.beta, rel=1e-14)


class TestNeighborPairs:
    def test_far_apart_floes_have_no_pairs(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(),
            ocean=STILL_OCEAN,
            radius=[0.1, 0.1],
            thickness=1.0,
            positions=[[-1.5, 0.0], [1.5, 0.0]],
        )
        pi, pj = contact_pairs(system)
        assert len(pi) == 0

    def test_contacting_chain(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(),
            ocean=STILL_OCEAN,
            radius=[0.3, 0.3, 0.3],
            thickness=1.0,
            positions=[[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]],
        )
        pi, pj = contact_pairs(system)
        assert list(zip(pi.tolist(), pj.tolist())) == [(0, 1), (1, 2)]

    @pytest.mark.parametrize("trial", range(10))
    def test_cell_list_equals_oracle(self, trial):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(2, 301))
        system = random_system(rng, n, r_range=(0.02, 0.3))
        cell = set(zip(*(a.tolist() for a in contact_pairs(system, "cell"))))
        brute = set(zip(*(a.tolist() for a in contact_pairs(system, "brute"))))
        assert cell == brute

    def test_cell_list_requires_periodicity(self):
        rng = np.random.default_rng(1)
        system = random_system(rng, 100, domain=Domain.square(math.pi, periodic=False))
        with pytest.raises(ParameterError):
            neighbor_pairs(system, "cell")
        # auto falls back to brute force silently
        neighbor_pairs(system, "auto")

    def test_candidates_are_superset_of_contacts(self):
        rng = np.random.default_rng(2)
        system = random_system(rng, 200)
        cand = set(zip(*(a.tolist() for a in neighbor_pairs(system, "cell"))))
        contacts = set(zip(*(a.tolist() for a in brute_force_pairs(system))))
        assert contacts <= cand


class TestVectorizedKernel:
    def test_matches_scalar_contact_path(self):
        rng = np.random.default_rng(3)
        system = random_system(rng, 80, r_range=(0.15, 0.4))
        pi, pj = contact_pairs(system)
        assert len(pi) > 0, "test fixture must contain contacts"
        pc = pair_contact_arrays(system, pi, pj)
        for k in range(len(pi)):
            pair = pair_force_torque(
                system.floe_state(pi[k]),
                system.floe_state(pj[k]),
                system.floe_params(pi[k]),
                system.floe_params(pj[k]),
                system.materials,
                system.domain,
                i=int(pi[k]),
                j=int(pj[k]),
            )
            assert pc["overlap"][k] == pytest.approx(pair.overlap, rel=1e-14)
            assert np.allclose(pc["f_normal"][k], pair.f_normal, rtol=1e-12, atol=1e-13)
            assert np.allclose(pc["f_tangent"][k], pair.f_tangent, rtol=1e-12, atol=1e-13)
            assert pc["torque_i"][k] == pytest.approx(pair.torque_i, rel=1e-12, abs=1e-13)
            assert pc["torque_j"][k] == pytest.approx(pair.torque_j, rel=1e-12, abs=1e-13)
            assert pc["t_contact"][k] == pytest.approx(pair.t_contact, rel=1e-12)
            assert pc["coulomb"][k] == pytest.approx(pair.coulomb, rel=1e-12)


class TestTotalForceTorque:
    def test_single_floe_drag_only(self):
        ocean = OceanField.constant((0.3, 0.0))
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(),
            ocean=ocean,
            radius=[0.1],
            thickness=1.0,
            positions=[[0.0, 0.0]],
            velocities=[[0.3, 0.0]],
            omega=[0.7],
        )
        force, torque = total_force_torque(system)
        assert np.array_equal(force, [[0.0, 0.0]])
        assert torque[0] == pytest.approx(-system.beta[0] * 0.7**2, rel=1e-14)

    def test_net_force_vanishes_without_drag(self):
        rng = np.random.default_rng(4)
        system = random_system(rng, 60, materials=MaterialParams().without_drag(), r_range=(0.2, 0.4))
        pi, _ = contact_pairs(system)
        assert len(pi) > 0
        force, torque = total_force_torque(system)
        scale = np.abs(force).sum()
        assert np.abs(force.sum(axis=0)).max() <= 1e-13 * scale

    def test_mean_field_prefactor_two_floes(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams().without_drag(),
            ocean=STILL_OCEAN,
            radius=[0.5, 0.5],
            thickness=1.0,
            positions=[[-0.45, 0.0], [0.45, 0.0]],
            velocities=[[0.3, 0.1], [-0.2, 0.0]],
            omega=[0.4, -0.1],
        )
        pair = pair_force_torque(
            system.floe_state(0),
            system.floe_state(1),
            system.floe_params(0),
            system.floe_params(1),
            system.materials,
            system.domain,
        )
        f_pair = np.add(pair.f_normal, pair.f_tangent)
        force_on, _ = total_force_torque(system, mean_field_scaling=True)
        force_off, _ = total_force_torque(system, mean_field_scaling=False)
        assert np.allclose(force_on[0], f_pair / 2.0, rtol=1e-13)
        assert np.allclose(force_off[0], f_pair, rtol=1e-13)
        assert np.allclose(force_on[0], -force_on[1], rtol=0, atol=0)

    def test_angular_momentum_balance_free_space(self):
        rng = np.random.default_rng(5)
        free = Domain.square(math.pi, periodic=False)
        system = random_system(rng, 40, domain=free, materials=MaterialParams().without_drag(), r_range=(0.2, 0.45))
        pi, pj = contact_pairs(system)
        assert len(pi) > 0
        force, torque = total_force_torque(system)
        total = np.sum(
            system.x_unwrapped[:, 0] * force[:, 1] - system.x_unwrapped[:, 1] * force[:, 0]
        ) + np.sum(torque)
        pc = pair_contact_arrays(system, pi, pj)
        tolerance = np.sum(pc["k_elastic"] * pc["overlap"] ** 2) / system.n
        assert abs(total) <= tolerance + 1e-13

    def test_accumulation_order_is_bit_reproducible(self):
        rng = np.random.default_rng(6)
        system = random_system(rng, 150, r_range=(0.1, 0.35))
        f1, t1 = total_force_torque(system, policy="cell")
        f2, t2 = total_force_torque(system, policy="brute")
        assert np.array_equal(f1, f2)
        assert np.array_equal(t1, t2)


class TestStepEuler:
    def test_free_flight(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams().without_drag(),
            ocean=STILL_OCEAN,
            radius=[0.1],
            thickness=1.0,
            positions=[[0.0, 0.0]],
            velocities=[[0.5, -0.2]],
            omega=[0.3],
        )
        stepped = step_euler(system, 0.1)
        assert np.allclose(stepped.x_unwrapped, [[0.05, -0.02]], rtol=1e-15)
        assert np.array_equal(stepped.v, system.v)
        assert stepped.theta[0] == pytest.approx(0.03)

    def test_single_euler_increment(self):
        ocean = OceanField.constant((10.0, 0.0))
        materials = MaterialParams()
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=materials,
            ocean=ocean,
            radius=[0.2],
            thickness=1.0,
            positions=[[0.0, 0.0]],
        )
        stepped = step_euler(system, 0.1)
        expected_force = system.alpha[0] * 10.0**2
        assert stepped.v[0, 0] == pytest.approx(0.1 * expected_force / system.mass[0], rel=1e-14)

    def test_bounce_loses_normal_speed(self):
        dt = 1e-4
        materials = MaterialParams(t_c_max=10 * dt).without_drag()
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=materials,
            ocean=STILL_OCEAN,
            radius=[0.5, 0.5],
            thickness=1.0,
            positions=[[-0.8, 0.0], [0.8, 0.0]],
            velocities=[[0.6, 0.0], [-0.6, 0.0]],
        )
        pre_speed = 1.2
        for _ in range(int(3.0 / dt)):
            system = step_euler(system, dt)
            if system.x[1, 0] - system.x[0, 0] > 1.3 and system.v[1, 0] > 0:
                break
        rel = system.v[1, 0] - system.v[0, 0]
        assert rel > 0, "floes should separate"
        assert rel < pre_speed, "restitution below one must lose speed"

    def test_divergence_reports_floe(self):
        system = ParticleSystem.create(
            domain=DOMAIN,
            materials=MaterialParams(),
            ocean=STILL_OCEAN,
            radius=[0.1, 0.1],
            thickness=1.0,
            positions=[[-1.0, 0.0], [1.0, 0.0]],
        )
        system.v[1, 0] = 1e308
        from floesim import IntegrationDivergedError

        with pytest.raises(IntegrationDivergedError) as err, np.errstate(over="ignore"):
            stepped = step_euler(system, 1e300)
            step_euler(stepped, 1e300)
        assert err.value.floe_index == 1


class TestSamplers:
    def test_powerlaw_inverse_cdf_endpoints(self):
        class Endpoint:
            def __init__(self, u):
                self.u = u

            def uniform(self, lo, hi, size):
                return np.full(size, self.u)

        assert sample_powerlaw_radii(3, 0.08, 0.32, rng=Endpoint(0.0))[0] == pytest.approx(0.08)
        assert sample_powerlaw_radii(3, 0.08, 0.32, rng=Endpoint(1.0))[0] == pytest.approx(0.32)
        assert sample_powerlaw_radii(3, 0.08, 0.32, rng=Endpoint(0.5))[0] == pytest.approx(0.128)

    def test_powerlaw_density_shape(self):
        r = sample_powerlaw_radii(200_000, 0.08, 0.32, seed=7)
        assert r.min() >= 0.08 and r.max() <= 0.32
        # analytic CDF: F(r) = (1/r_min - 1/r) / (1/r_min - 1/r_max)
        mid = 0.128
        expected = (1 / 0.08 - 1 / mid) / (1 / 0.08 - 1 / 0.32)
        assert np.mean(r <= mid) == pytest.approx(expected, abs=5e-3)

    def test_powerlaw_deterministic_for_seed(self):
        assert np.array_equal(
            sample_powerlaw_radii(50, 0.08, 0.32, seed=11),
            sample_powerlaw_radii(50, 0.08, 0.32, seed=11),
        )

    def test_powerlaw_bad_bounds(self):
        with pytest.raises(ParameterError):
            sample_powerlaw_radii(5, 0.5, 0.1)

    def test_nonoverlapping_accepts_valid_configs(self):
        rng = np.random.default_rng(12)
        radii = np.full(30, 0.15)
        pos = init_nonoverlapping(30, radii, DOMAIN, rng=rng)
        from floesim import min_image_displacement

        ii, jj = np.triu_indices(30, k=1)
        disp = min_image_displacement(pos[ii], pos[jj], DOMAIN)
        assert np.all(np.hypot(disp[:, 0], disp[:, 1]) >= 0.3)

    def test_packing_failure_reports_progress(self):
        with pytest.raises(PackingError) as err:
            init_nonoverlapping(10, np.full(10, 3.0), DOMAIN, seed=0, max_attempts=50)
        assert 0 < err.value.placed < 10

    def test_example_population_packs(self):
        rng = np.random.default_rng(42)
        radii = sample_powerlaw_radii(100, 0.08, 0.32, rng=rng)
        pos = init_nonoverlapping(100, radii, DOMAIN, rng=rng)
        assert pos.shape == (100, 2)

    def test_lattice_centers(self):
        assert np.allclose(init_lattice(1, 1, DOMAIN), [[0.0, 0.0]])
        four = init_lattice(2, 2, DOMAIN)
        expected = [[-math.pi / 2, -math.pi / 2], [-math.pi / 2, math.pi / 2],
                    [math.pi / 2, -math.pi / 2], [math.pi / 2, math.pi / 2]]
        assert np.allclose(four, expected)
        assert init_lattice(100, 100, DOMAIN).shape == (10_000, 2)
