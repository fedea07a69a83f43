"""Experiment orchestration and on-disk outputs.

A run executes either the controlled solve or the uncontrolled Euler
baseline and writes: masses.csv (per-node group masses), iterations.csv
(solve trace, control mode only), density snapshots in the raw field
format, and a manifest that re-parses to the exact configuration.
All numbers are written with fixed formatting so identical configurations
produce byte-identical outputs.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np

from .config import RunConfig, to_manifest
from .grid import GridSpec, read_field, write_field
from .model import (
    GROUPS,
    I,
    ModelParams,
    R,
    S,
    TerminalCost,
    euler_uncontrolled,
    mass_series,
)
from .presets import make_preset
from .solver import RunReport, SolverOptions, solve

EXIT_OK = 0
EXIT_ITERATION_CAP = 3


@dataclasses.dataclass(frozen=True)
class _ExplicitPreset:
    """Adapter giving file-based initial densities the preset interface."""

    name: str
    beta: float
    gamma: float
    rho0: np.ndarray
    terminal_kind: str
    potential_slice: np.ndarray | None = None

    def initial_density(self, grid: GridSpec) -> np.ndarray:
        if self.rho0.shape != (3, grid.nx, grid.ny):
            raise ValueError(
                f"initial densities {self.rho0.shape[1:]} do not match grid "
                f"{grid.nx}x{grid.ny}"
            )
        return self.rho0

    def terminal_cost(self, grid: GridSpec) -> TerminalCost:
        if self.terminal_kind == "quadratic":
            return TerminalCost("quadratic")
        return TerminalCost("quadratic_plus_potential", self.potential_slice)


def model_params(config: RunConfig) -> ModelParams:
    return ModelParams(
        beta=config.beta, gamma=config.gamma,
        alpha_s=config.alpha_s, alpha_i=config.alpha_i, alpha_r=config.alpha_r,
        eta_s=config.eta_s, eta_i=config.eta_i, eta_r=config.eta_r,
        c=config.c, sigma1=config.sigma1, sigma2=config.sigma2,
    )


def solver_options(config: RunConfig) -> SolverOptions:
    return SolverOptions(
        tau_s=config.tau_s, tau_i=config.tau_i, tau_r=config.tau_r,
        sigma_s=config.sigma_dual_s, sigma_i=config.sigma_dual_i,
        sigma_r=config.sigma_dual_r,
        tol=config.tol, max_iter=config.max_iter,
        preconditioner=config.preconditioner, log_every=config.log_every,
    )


def build_preset(config: RunConfig):
    if config.experiment:
        return make_preset(config.experiment)
    rho0 = np.stack(
        [read_field(p)[0] for p in (config.initial_s, config.initial_i, config.initial_r)]
    )
    pot = read_field(config.potential)[0] if config.potential else None
    return _ExplicitPreset(
        "explicit", config.beta, config.gamma, rho0, config.terminal, pot
    )


def write_masses_csv(path: str, rho: np.ndarray, grid: GridSpec) -> None:
    masses = np.stack([mass_series(rho[g], grid) for g in (S, I, R)])
    times = grid.times()
    with open(path, "w", newline="") as f:
        f.write("t,S,I,R\n")
        for n in range(grid.nt):
            f.write(
                f"{times[n]:.11e},{masses[S, n]:.11e},"
                f"{masses[I, n]:.11e},{masses[R, n]:.11e}\n"
            )


def write_iterations_csv(path: str, report: RunReport) -> None:
    with open(path, "w", newline="") as f:
        f.write("iter,objective,rel_error,res_S,res_I,res_R\n")
        for k in range(report.iterations):
            norms = report.residual_norms[k]
            f.write(
                f"{k + 1},{report.objective[k + 1]:.11e},{report.rel_error[k]:.11e},"
                f"{norms[0]:.11e},{norms[1]:.11e},{norms[2]:.11e}\n"
            )


def write_outputs(
    rho: np.ndarray,
    report: RunReport | None,
    config: RunConfig,
    phi: np.ndarray | None = None,
) -> None:
    """Write masses.csv, optional iterations.csv, snapshots and manifest."""
    grid = GridSpec(config.nx, config.ny, config.nt)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    write_masses_csv(os.path.join(out, "masses.csv"), rho, grid)
    if report is not None:
        write_iterations_csv(os.path.join(out, "iterations.csv"), report)
    for n in config.snapshots:
        for g in (S, I, R):
            write_field(os.path.join(out, f"rho_{GROUPS[g]}_t{n:04d}.f64"), rho[g, n])
            if config.save_phi and phi is not None:
                write_field(os.path.join(out, f"phi_{GROUPS[g]}_t{n:04d}.f64"), phi[g, n])
    with open(os.path.join(out, "run_manifest.txt"), "w") as f:
        f.write(to_manifest(config))


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    grid = GridSpec(config.nx, config.ny, config.nt)
    preset = build_preset(config)
    if config.mode == "no_control":
        rho = euler_uncontrolled(preset.initial_density(grid), config.beta, config.gamma, grid)
        write_outputs(rho, None, config)
        return EXIT_OK
    params = model_params(config)
    opts = solver_options(config)
    state, report = solve(preset, grid, params, opts)
    write_outputs(state.rho, report, config, phi=state.phi)
    return EXIT_OK if report.converged else EXIT_ITERATION_CAP
