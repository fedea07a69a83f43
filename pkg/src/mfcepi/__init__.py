"""Velocity-field control of spatial SIR epidemics.

A library and CLI that computes optimal movement strategies for
susceptible, infected and recovered population densities on the unit
square, by solving a kinetic-cost control problem constrained by
nonlocal transport-reaction-diffusion dynamics with a preconditioned
primal-dual method.
"""

from .config import ConfigError, RunConfig, parse_config, resolve_config, to_manifest
from .grid import (
    GridSpec,
    div,
    dt_forward,
    grad,
    integrate_space,
    integrate_spacetime,
    laplacian,
    read_field,
    write_field,
)
from .kernel import KernelOp, build_kernel, convolve, row_mass
from .model import (
    ModelParams,
    PopulationState,
    TerminalCost,
    classical_sir,
    constraint_residual,
    euler_uncontrolled,
    kkt_residual,
    mass_series,
    objective,
    terminal_energy,
    terminal_gradient,
)
from .presets import PRESET_NAMES, ExperimentPreset, make_preset
from .runner import run, write_outputs
from .solver import (
    RunReport,
    SolverDivergenceError,
    SolverOptions,
    root_plus,
    solve,
    update_m,
    update_phi,
    update_rho,
)
from .spectral import (
    PreconditionerCoeffs,
    apply_elliptic,
    preconditioner_coeffs,
    solve_elliptic,
)

__version__ = "0.1.0"
