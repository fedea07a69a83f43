"""Configuration parsing, run orchestration, and output files."""

import hashlib
import os

import numpy as np
import pytest

from mfcepi import (
    ConfigError,
    GridSpec,
    parse_config,
    read_field,
    resolve_config,
    run,
    to_manifest,
    write_field,
)
from mfcepi.config import default_snapshot_indices
from mfcepi.runner import EXIT_ITERATION_CAP, EXIT_OK

FAST_SOLVE = {
    "nx": "16", "ny": "16", "nt": "8",
    "tau_s": "0.05", "tau_i": "0.05", "tau_r": "0.05",
    "sigma_dual_s": "0.5", "sigma_dual_i": "0.5", "sigma_dual_r": "0.5",
    "tol": "1e-5", "log_every": "200",
}


class TestParsing:
    def test_experiment_defaults(self):
        config = resolve_config(overrides={"experiment": "exp1"})
        assert (config.nx, config.ny, config.nt) == (128, 128, 32)
        assert (config.beta, config.gamma) == (0.7, 0.1)
        assert (config.sigma1, config.sigma2) == (0.02, 0.02)
        assert config.c == 0.01
        assert config.eta_s == config.eta_i == config.eta_r == 0.01
        assert (config.alpha_s, config.alpha_i, config.alpha_r) == (1.0, 10.0, 1.0)
        assert config.terminal == "quadratic"

    def test_experiment_rates_resolved(self):
        assert resolve_config(overrides={"experiment": "exp2b"}).gamma == 0.36
        assert resolve_config(overrides={"experiment": "exp3a"}).beta == 0.96
        assert (
            resolve_config(overrides={"experiment": "exp3a"}).terminal
            == "quadratic_plus_potential"
        )

    def test_nt_override_changes_dt_only(self):
        config = resolve_config(overrides={"experiment": "exp1", "nt": "16"})
        assert config.nt == 16
        assert GridSpec(config.nx, config.ny, config.nt).dt == 1.0 / 15
        assert config.nx == 128

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="alpha_X"):
            resolve_config(overrides={"experiment": "exp1", "alpha_X": "2"})

    def test_bad_value_named(self):
        with pytest.raises(ConfigError, match="beta"):
            resolve_config(overrides={"experiment": "exp1", "beta": "fast"})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="exp7"):
            resolve_config(overrides={"experiment": "exp7"})

    def test_preset_conflicts_with_explicit_densities(self):
        with pytest.raises(ConfigError, match="either"):
            resolve_config(
                overrides={"experiment": "exp1", "initial_s": "a", "initial_i": "b",
                           "initial_r": "c"}
            )

    def test_no_preset_requires_all_densities(self):
        with pytest.raises(ConfigError, match="initial"):
            resolve_config(overrides={"initial_s": "only_one.f64"})

    def test_snapshots_default_indices(self):
        assert default_snapshot_indices(32) == (0, 7, 15, 23, 31)
        config = resolve_config(overrides={"experiment": "exp1"})
        assert config.snapshots == (0, 7, 15, 23, 31)

    def test_snapshots_out_of_range(self):
        with pytest.raises(ConfigError, match="snapshot"):
            resolve_config(overrides={"experiment": "exp1", "snapshots": "0,40"})

    def test_config_file_with_line_diagnostics(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = exp1\nbad line\n")
        with pytest.raises(ConfigError, match=r":2"):
            parse_config(path)

    def test_config_file_unknown_key_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nexperiment = exp1\nalpha_X = 3\n")
        with pytest.raises(ConfigError, match=r":3.*alpha_X"):
            parse_config(path)

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = exp1\nnt = 16\n")
        config = parse_config(path, {"nt": "8"})
        assert config.nt == 8

    def test_manifest_roundtrip(self, tmp_path):
        config = resolve_config(
            overrides={"experiment": "exp2a", "nx": "32", "ny": "32", "nt": "8",
                       "tol": "3e-7", "save_phi": "true", "out_dir": "some/dir"}
        )
        path = tmp_path / "run_manifest.txt"
        path.write_text(to_manifest(config))
        assert parse_config(path) == config


def run_config(tmp_path, name, **extra):
    overrides = {"experiment": "exp1", "mode": "no_control",
                 "out_dir": str(tmp_path / name), **FAST_SOLVE, **extra}
    return resolve_config(overrides=overrides)


def tree_digest(root):
    digest = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for fname in sorted(filenames):
            digest.update(fname.encode())
            with open(os.path.join(dirpath, fname), "rb") as f:
                digest.update(f.read())
    return digest.hexdigest()


class TestRun:
    def test_no_control_outputs(self, tmp_path):
        config = run_config(tmp_path, "nc")
        assert run(config) == EXIT_OK
        out = tmp_path / "nc"
        lines = (out / "masses.csv").read_text().splitlines()
        assert lines[0] == "t,S,I,R"
        assert len(lines) == config.nt + 1
        masses_s = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(a > b for a, b in zip(masses_s, masses_s[1:]))
        assert not (out / "iterations.csv").exists()
        assert (out / "run_manifest.txt").exists()
        for n in config.snapshots:
            for group in ("S", "I", "R"):
                assert (out / f"rho_{group}_t{n:04d}.f64").exists()

    def test_masses_first_row_matches_initial_integrals(self, tmp_path):
        from mfcepi import integrate_space, make_preset

        config = run_config(tmp_path, "nc2")
        run(config)
        grid = GridSpec(config.nx, config.ny, config.nt)
        rho0 = make_preset("exp1").initial_density(grid)
        first = (tmp_path / "nc2" / "masses.csv").read_text().splitlines()[1]
        _, s, i, r = (float(tok) for tok in first.split(","))
        assert s == pytest.approx(float(integrate_space(rho0[0], grid)), rel=1e-11)
        assert i == pytest.approx(float(integrate_space(rho0[1], grid)), rel=1e-11)
        assert r == 0.0

    def test_control_outputs_and_convergence_exit(self, tmp_path):
        config = run_config(tmp_path, "ctl", mode="control")
        assert run(config) == EXIT_OK
        out = tmp_path / "ctl"
        header = (out / "iterations.csv").read_text().splitlines()[0]
        assert header == "iter,objective,rel_error,res_S,res_I,res_R"

    def test_iteration_cap_exit_code(self, tmp_path):
        config = run_config(tmp_path, "cap", mode="control",
                            tol="1e-30", max_iter="3")
        assert run(config) == EXIT_ITERATION_CAP

    def test_snapshot_roundtrip(self, tmp_path):
        config = run_config(tmp_path, "snap")
        run(config)
        grid = GridSpec(config.nx, config.ny, config.nt)
        from mfcepi import euler_uncontrolled, make_preset

        rho = euler_uncontrolled(
            make_preset("exp1").initial_density(grid), config.beta, config.gamma, grid
        )
        n = config.snapshots[-1]
        stored = read_field(tmp_path / "snap" / f"rho_I_t{n:04d}.f64")
        assert np.array_equal(stored[0], rho[1, n])

    def test_determinism_byte_identical(self, tmp_path):
        config = run_config(tmp_path, "det", mode="control")
        run(config)
        first = tree_digest(tmp_path / "det")
        run(config)
        assert tree_digest(tmp_path / "det") == first

    def test_explicit_initial_densities(self, tmp_path):
        grid = GridSpec(16, 16, 8)
        x, y = grid.cell_centers()
        paths = {}
        for key, field in (
            ("initial_s", 0.5 * np.exp(-8 * ((x - 0.4) ** 2 + (y - 0.5) ** 2))),
            ("initial_i", 0.3 * np.exp(-20 * ((x - 0.6) ** 2 + (y - 0.6) ** 2))),
            ("initial_r", np.zeros_like(x)),
        ):
            p = tmp_path / f"{key}.f64"
            write_field(p, field)
            paths[key] = str(p)
        config = resolve_config(
            overrides={**FAST_SOLVE, **paths, "mode": "no_control",
                       "beta": "0.5", "gamma": "0.2",
                       "out_dir": str(tmp_path / "explicit")}
        )
        assert run(config) == EXIT_OK
        lines = (tmp_path / "explicit" / "masses.csv").read_text().splitlines()
        assert len(lines) == 9


class TestCLI:
    def test_cli_runs_and_maps_flags(self, tmp_path):
        from mfcepi.cli import main

        out = tmp_path / "cli_run"
        code = main([
            "--experiment", "exp1", "--mode", "no_control",
            "--nx", "16", "--ny", "16", "--nt", "8",
            "--sigma", "0.05", "--eta", "0.02",
            "--out-dir", str(out), "--snapshots", "0,7",
        ])
        assert code == 0
        manifest = (out / "run_manifest.txt").read_text()
        assert "sigma1 = 0.05" in manifest and "sigma2 = 0.05" in manifest
        assert "eta_i = 0.02" in manifest
        assert "snapshots = 0,7" in manifest

    def test_cli_rejects_bad_config(self, capsys):
        from mfcepi.cli import main

        assert main(["--mode", "control"]) == 2  # no preset, no densities
        assert "initial" in capsys.readouterr().err
