"""Config schema, presets, artifact plumbing, CLI wiring, determinism."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

import floesim.cli as cli
from floesim.config import (
    SimConfig,
    apply_overrides,
    build_system,
    example1_config,
    example2_config,
    load_config,
    save_config,
)
from floesim.core import ParameterError
from floesim.output import read_fields_csv, read_floes_csv
from floesim.runner import run_example1, run_example2, run_particle
from floesim.validate import SuiteResult, binary_collision_system, suite_dissipation
from floesim.runner import run_particle_simulation

TINY_PARTICLE = dict(
    mode="particle",
    population={
        "type": "powerlaw",
        "n": 12,
        "r_min": 0.08,
        "r_max": 0.32,
        "thickness": {"type": "uniform", "low": 0.5, "high": 2.0},
    },
    initial_velocity={"type": "gaussian", "vx_mean": 0.2, "vx_std": 0.2, "vy_std": 0.2,
                      "omega_mean": 0.1, "omega_std": 0.3},
    dt=1e-3,
    t_final=0.02,
    sample_stride=2,
    snapshot_times=[0.0, 0.02],
    seed=3,
)


class TestConfig:
    def test_yaml_roundtrip(self, tmp_path):
        cfg = SimConfig(**TINY_PARTICLE)
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded.to_dict() == cfg.to_dict()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ParameterError):
            SimConfig.from_dict({"mode": "particle", "viscosity": 1.0})

    def test_invariants_enforced(self):
        with pytest.raises(ParameterError):
            SimConfig(**{**TINY_PARTICLE, "dt": -1.0})
        with pytest.raises(ParameterError):
            SimConfig(**{**TINY_PARTICLE, "sample_stride": 1000})
        with pytest.raises(ParameterError):
            SimConfig(**{**TINY_PARTICLE, "materials": {"restitution": 1.5}})

    def test_default_contact_cap_tracks_dt(self):
        cfg = SimConfig(**TINY_PARTICLE)
        assert cfg.material_params().t_c_max == pytest.approx(10 * cfg.dt)
        cfg2 = SimConfig(**{**TINY_PARTICLE, "materials": {"t_c_max": 0.5}})
        assert cfg2.material_params().t_c_max == 0.5

    def test_overrides_merge_and_echo(self):
        cfg = example1_config(seed=5)
        merged, echo = apply_overrides(cfg, {"materials": {"ocean_density": 0.0}, "t_final": 1.0})
        assert merged.material_params().ocean_density == 0.0
        assert merged.t_final == 1.0
        assert merged.population["n"] == 100
        assert echo == {"materials": {"ocean_density": 0.0}, "t_final": 1.0}

    def test_snapshot_steps_clamped_to_run_length(self):
        cfg = SimConfig(**{**TINY_PARTICLE, "snapshot_times": [0.0, 1e9]})
        assert cfg.snapshot_steps() == [0, cfg.n_steps()]


class TestPresets:
    def test_example1_parameters_match_reference(self):
        cfg = example1_config()
        mat = cfg.material_params()
        assert (mat.ice_density, mat.restitution, mat.friction) == (1.0, 0.15, 0.2)
        assert (mat.youngs_modulus, mat.poisson_ratio) == (1.0e4, 0.7)
        assert (mat.ocean_density, mat.drag_vertical, mat.drag_horizontal) == (1.0, 2.0, 4.0)
        assert cfg.ocean == {"type": "constant", "u0": [0.3, 0.0]}
        assert cfg.population["n"] == 100
        assert (cfg.population["r_min"], cfg.population["r_max"]) == (0.08, 0.32)
        assert cfg.population["thickness"] == {"type": "uniform", "low": 0.5, "high": 2.0}
        assert (cfg.dt, cfg.t_final) == (1e-3, 10.0)
        iv = cfg.initial_velocity
        assert (iv["vx_mean"], iv["vx_std"], iv["vy_mean"], iv["vy_std"]) == (0.2, 0.2, 0.0, 0.2)
        assert (iv["omega_mean"], iv["omega_std"]) == (0.1, 0.3)
        dom = cfg.domain_obj()
        assert np.allclose(dom.lower, (-math.pi, -math.pi)) and all(dom.periodic)

    def test_example2_desk_and_paper_scale(self):
        desk = example2_config()
        assert desk.population["nx"] == 50 and desk.hydro["nx"] == 25
        assert desk.population["radius"] == 0.02
        assert desk.population["thickness"] == {"type": "constant", "value": 1.0}
        assert desk.ocean == {"type": "rotational"}
        paper = example2_config(paper_scale=True)
        assert paper.population["nx"] == 100 and paper.hydro["nx"] == 50
        assert paper.population["nx"] * paper.population["ny"] == 10_000

    def test_build_system_deterministic(self):
        cfg = example1_config(seed=9)
        a = build_system(cfg)
        b = build_system(cfg)
        assert np.array_equal(a.radius, b.radius)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.omega, b.omega)

    def test_build_system_seed_sensitivity(self):
        a = build_system(example1_config(seed=1))
        b = build_system(example1_config(seed=2))
        assert not np.array_equal(a.x, b.x)


class TestArtifacts:
    def test_particle_run_tree_and_manifest(self, tmp_path):
        cfg = SimConfig(**TINY_PARTICLE)
        run_dir, out = run_particle(cfg, tmp_path, overrides_echo={"seed": 3})
        assert (run_dir / "floes.csv").exists()
        assert (run_dir / "moments.csv").exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["config"] == cfg.to_dict()
        assert manifest["overrides"] == {"seed": 3}
        assert manifest["seed"] == 3
        assert manifest["version"]

    def test_floes_csv_roundtrip(self, tmp_path):
        cfg = SimConfig(**TINY_PARTICLE)
        run_dir, out = run_particle(cfg, tmp_path)
        snaps = read_floes_csv(run_dir / "floes.csv")
        assert set(np.round(list(snaps), 6)) == {0.0, 0.02}
        final = snaps[0.02]
        assert np.array_equal(final["x"], out.final_system.x[:, 0])
        assert np.array_equal(final["vx"], out.final_system.v[:, 0])

    def test_determinism_bitwise(self, tmp_path):
        cfg = SimConfig(**TINY_PARTICLE)
        dir_a, _ = run_particle(cfg, tmp_path / "a")
        dir_b, _ = run_particle(cfg, tmp_path / "b")
        for name in ("floes.csv", "moments.csv"):
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()

    def test_example1_small_summary(self, tmp_path):
        run_dir, out, summary = run_example1(
            seed=1,
            overrides={"population": {"n": 10}, "t_final": 0.05, "snapshot_times": [0.0, 0.05]},
            out_root=tmp_path,
        )
        assert set(summary) >= {
            "mean_speed_mismatch",
            "mean_abs_spin",
            "mean_spin",
            "ke_translational",
            "ke_rotational",
            "ke_drift_target",
            "strain_burst_count",
        }
        saved = json.loads((run_dir / "summary.json").read_text())
        assert saved["mean_speed_mismatch"] == summary["mean_speed_mismatch"]
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["overrides"]["population"] == {"n": 10}

    def test_example1_drag_off_conserves_momentum(self, tmp_path):
        _, out, _ = run_example1(
            seed=2,
            overrides={
                "population": {"n": 12},
                "materials": {"ocean_density": 0.0},
                "t_final": 0.05,
                "snapshot_times": [0.0],
            },
            out_root=tmp_path,
        )
        p0 = np.asarray(out.moments[0].momentum)
        drift = max(np.hypot(*(np.asarray(r.momentum) - p0)) for r in out.moments)
        assert drift <= 1e-12 * max(np.hypot(*p0), 1.0)

    def test_example2_small_pipeline(self, tmp_path):
        run_dir, report = run_example2(
            seed=0,
            overrides={
                "population": {"nx": 10, "ny": 10},
                "hydro": {"nx": 5, "ny": 5},
                "t_final": 0.05,
                "snapshot_times": [0.0, 0.05],
                "compare_times": [0.0, 0.05],
                "sample_stride": 10,
            },
            out_root=tmp_path,
        )
        for name in ("floes.csv", "moments.csv", "fields.csv", "cells.csv", "compare.json", "summary.json", "manifest.json"):
            assert (run_dir / name).exists(), name
        entry0 = report["comparisons"][0]
        assert entry0["rho"]["relative"] <= 1e-12
        assert entry0["u"]["absolute"] == 0.0
        fields = read_fields_csv(run_dir / "fields.csv")
        assert next(iter(fields.values()))["nx"] == 5


class TestCli:
    def test_sim_particle_from_config(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        save_config(SimConfig(**TINY_PARTICLE), cfg_path)
        rc = cli.main(["sim", "particle", str(cfg_path), "--out", str(tmp_path / "out"), "--seed", "11"])
        assert rc == 0
        out_dirs = list((tmp_path / "out").iterdir())
        assert len(out_dirs) == 1
        manifest = json.loads((out_dirs[0] / "manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["overrides"] == {"seed": 11}

    def test_sim_hydro_from_config(self, tmp_path):
        cfg = SimConfig(
            mode="hydro",
            ocean={"type": "rotational"},
            population={"type": "lattice", "nx": 5, "ny": 5, "radius": 0.02,
                        "thickness": {"type": "constant", "value": 1.0}},
            dt=1e-3,
            t_final=0.01,
            sample_stride=10,
            snapshot_times=[0.0, 0.01],
            hydro={"nx": 8, "ny": 8},
        )
        cfg_path = tmp_path / "hydro.yaml"
        save_config(cfg, cfg_path)
        rc = cli.main(["sim", "hydro", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 0
        fields = read_fields_csv(next((tmp_path / "out").iterdir()) / "fields.csv")
        assert len(fields) == 2

    def test_compare_subcommand(self, tmp_path, capsys):
        run_dir, _ = run_example2(
            seed=0,
            overrides={
                "population": {"nx": 8, "ny": 8},
                "hydro": {"nx": 4, "ny": 4},
                "t_final": 0.02,
                "snapshot_times": [0.0, 0.02],
                "sample_stride": 4,
            },
            out_root=tmp_path,
        )
        report_path = tmp_path / "cmp.json"
        rc = cli.main([
            "compare", str(run_dir / "floes.csv"), str(run_dir / "fields.csv"),
            "--out", str(report_path),
        ])
        assert rc == 0
        report = json.loads(report_path.read_text())
        inline = json.loads((run_dir / "compare.json").read_text())
        assert report["comparisons"][0]["rho"] == inline["comparisons"][0]["rho"]

    def test_validate_exit_codes(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, "run_all_suites", lambda seed=None: [SuiteResult("stub", True)])
        assert cli.main(["validate"]) == 0
        monkeypatch.setattr(
            cli,
            "run_all_suites",
            lambda seed=None: [SuiteResult("stub", False, violation={"case": 1})],
        )
        assert cli.main(["validate"]) == 1
        assert "violating instance" in capsys.readouterr().out


class TestOutputRoot:
    def test_env_var_controls_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLOESIM_OUT", str(tmp_path / "envroot"))
        cfg_path = tmp_path / "cfg.yaml"
        save_config(SimConfig(**TINY_PARTICLE), cfg_path)
        assert cli.main(["sim", "particle", str(cfg_path)]) == 0
        assert any((tmp_path / "envroot").iterdir())


class TestSuiteDeterminism:
    def test_seeded_suites_reproduce(self):
        from floesim.validate import suite_coulomb_cap, suite_force_antisymmetry

        for suite in (suite_force_antisymmetry, suite_coulomb_cap):
            a = suite(seed=5, n_pairs=200)
            b = suite(seed=5, n_pairs=200)
            assert a.passed == b.passed and a.details == b.details


class TestMutationDetection:
    def test_flipped_damping_sign_fails_dissipation(self):
        # anti-damping contacts must pump energy and trip the monotonicity suite
        system = binary_collision_system(dt=1e-4)
        object.__setattr__(system.materials, "damping_factor", +abs(system.materials.damping_factor))
        run = run_particle_simulation(
            system, dt=1e-4, n_steps=14_000, sample_stride=10,
            track_extremes=True,
        )
        assert run.extremes["k_damp_max"] > 0, "the collision must occur"
        result = suite_dissipation(run=run, dt=1e-4)
        assert not result.passed
