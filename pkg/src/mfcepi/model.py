"""Problem definition: parameters, objective, residual diagnostics, baselines.

Populations are stacked on a leading group axis in the order S, I, R
(indices 0, 1, 2 throughout).  The transport constraint is discretized
explicitly in time: residual row n couples nodes n and n+1 through the
forward time difference while every spatial and reaction term is evaluated
at the left node n, matching the uncontrolled Euler baseline.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .grid import (
    GridSpec,
    div,
    grad,
    integrate_space,
    laplacian,
    time_weights,
)
from .kernel import KernelOp, convolve

GROUPS = ("S", "I", "R")
S, I, R = 0, 1, 2


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Rates, cost weights, diffusion and kernel widths."""

    beta: float = 0.7
    gamma: float = 0.1
    alpha_s: float = 1.0
    alpha_i: float = 10.0
    alpha_r: float = 1.0
    eta_s: float = 0.01
    eta_i: float = 0.01
    eta_r: float = 0.01
    c: float = 0.01
    sigma1: float = 0.02
    sigma2: float = 0.02

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("rates beta, gamma must be nonnegative")
        if min(self.alpha_s, self.alpha_i, self.alpha_r) <= 0:
            raise ValueError("movement cost weights alpha must be positive")
        if min(self.eta_s, self.eta_i, self.eta_r) < 0:
            raise ValueError("diffusion coefficients eta must be nonnegative")
        if self.c < 0:
            raise ValueError("congestion weight c must be nonnegative")

    @property
    def alpha(self) -> tuple[float, float, float]:
        return (self.alpha_s, self.alpha_i, self.alpha_r)

    @property
    def eta(self) -> tuple[float, float, float]:
        return (self.eta_s, self.eta_i, self.eta_r)


@dataclasses.dataclass(frozen=True, eq=False)
class TerminalCost:
    """Terminal penalty on the infected density: 0.5*int rho^2, optionally
    plus int rho*V for a nonnegative obstacle potential V."""

    kind: str = "quadratic"
    potential: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "quadratic_plus_potential"):
            raise ValueError(f"unknown terminal cost kind {self.kind!r}")
        if self.kind == "quadratic" and self.potential is not None:
            raise ValueError("quadratic terminal cost takes no potential")
        if self.kind == "quadratic_plus_potential":
            if self.potential is None:
                raise ValueError("potential terminal cost requires a potential slice")
            if np.any(self.potential < 0):
                raise ValueError("potential must be nonnegative")


def terminal_energy(rho_i_final: np.ndarray, cost: TerminalCost, grid: GridSpec) -> float:
    e = 0.5 * float(integrate_space(rho_i_final**2, grid))
    if cost.kind == "quadratic_plus_potential":
        e += float(integrate_space(rho_i_final * cost.potential, grid))
    return e


def terminal_gradient(rho_i_final: np.ndarray, cost: TerminalCost) -> np.ndarray:
    """Variation of the terminal cost at the terminal infected density."""
    if cost.kind == "quadratic_plus_potential":
        return rho_i_final + cost.potential
    return rho_i_final.copy()


@dataclasses.dataclass
class PopulationState:
    """All unknowns: densities, momenta and multipliers, stacked (3, nt, nx, ny)."""

    grid: GridSpec
    rho: np.ndarray
    mx: np.ndarray
    my: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PopulationState":
        shape = (3, *grid.shape)
        return cls(grid, np.zeros(shape), np.zeros(shape), np.zeros(shape), np.zeros(shape))

    def copy(self) -> "PopulationState":
        return PopulationState(
            self.grid, self.rho.copy(), self.mx.copy(), self.my.copy(), self.phi.copy()
        )


def objective(state: PopulationState, params: ModelParams, cost: TerminalCost) -> float:
    """Total cost: terminal energy + kinetic + congestion running costs.

    The kinetic integrand alpha*|m|^2/(2*rho) is 0 where rho = 0 and m = 0,
    and +inf (returned as float inf) where rho = 0 but m != 0.
    """
    grid = state.grid
    m2 = state.mx**2 + state.my**2
    positive = state.rho > 0
    if np.any(m2[~positive] > 0):
        return float("inf")
    kin = np.zeros_like(state.rho)
    np.divide(m2, state.rho, out=kin, where=positive)
    alpha = np.asarray(params.alpha)[:, None, None, None]
    running = 0.5 * np.sum(alpha * kin, axis=0)
    running += 0.5 * params.c * np.sum(state.rho, axis=0) ** 2
    w = time_weights(grid)
    total = float(np.sum(w * integrate_space(running, grid)))
    return total + terminal_energy(state.rho[I, -1], cost, grid)


def _reaction_terms(
    rho: np.ndarray, conv_i: np.ndarray, conv_s: np.ndarray, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reaction parts of the three transport equations (same time rows as
    the inputs): +beta*rho_S*(K*rho_I), -beta*rho_I*(K*rho_S)+gamma*rho_I,
    -gamma*rho_I."""
    infect_s = params.beta * rho[S] * conv_i
    infect_i = -params.beta * rho[I] * conv_s + params.gamma * rho[I]
    recover = -params.gamma * rho[I]
    return infect_s, infect_i, recover


def constraint_residual(
    state: PopulationState, params: ModelParams, kernel_op: KernelOp
) -> tuple[np.ndarray, np.ndarray]:
    """Transport-constraint residuals on the nt-1 time rows.

    Returns (res, norms) with res of shape (3, nt-1, nx, ny) and norms the
    weighted L2 norm of each group's residual field.
    """
    grid = state.grid
    rho_left = state.rho[:, :-1]
    conv_i = convolve(kernel_op, rho_left[I])
    conv_s = convolve(kernel_op, rho_left[S])
    return _constraint_residual_from_conv(state, params, conv_i, conv_s)


def _constraint_residual_from_conv(
    state: PopulationState, params: ModelParams, conv_i: np.ndarray, conv_s: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    grid = state.grid
    rho_left = state.rho[:, :-1]
    res = (state.rho[:, 1:] - rho_left) / grid.dt
    res += div(state.mx[:, :-1], state.my[:, :-1], grid)
    infect_s, infect_i, recover = _reaction_terms(rho_left, conv_i, conv_s, params)
    res[S] += infect_s
    res[I] += infect_i
    res[R] += recover
    eta2 = np.asarray(params.eta)[:, None, None, None] ** 2
    res -= 0.5 * eta2 * laplacian(rho_left, grid)
    norms = residual_norms(res, grid)
    return res, norms


def residual_norms(res: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Weighted L2 norm per group: sqrt(sum r^2 dx dy dt) over the rows given."""
    cell = grid.dx * grid.dy * grid.dt
    return np.sqrt(np.sum(res**2, axis=tuple(range(1, res.ndim))) * cell)


def kkt_residual(
    state: PopulationState,
    params: ModelParams,
    kernel_op: KernelOp,
    cost: TerminalCost,
) -> dict[str, float]:
    """Norms of the six optimality PDEs plus the terminal mismatch.

    The three dual equations, evaluated on rows 1..nt-1 with the backward
    time difference (the exact adjoint pairing of the forward-difference
    transport rows), use the velocity recovered from the multipliers,
    v_i = -grad(phi_i)/alpha_i, and the kernel couplings that are exact
    adjoints of the transport constraints.  Where a density vanishes the
    dual equation relaxes to an inequality (complementary slackness), so
    only its negative part is counted there.  The three primal equations
    are the transport constraints with m_i replaced by rho_i * v_i, on
    rows 0..nt-2.
    """
    grid = state.grid
    rho, phi = state.rho, state.phi
    alpha = params.alpha
    eta = params.eta
    total = np.sum(rho, axis=0)

    conv_i_all = convolve(kernel_op, rho[I])
    conv_s_all = convolve(kernel_op, rho[S])
    conv_phii_rhoi = convolve(kernel_op, phi[I] * rho[I])
    conv_phis_rhos = convolve(kernel_op, phi[S] * rho[S])

    dtphi = (phi[:, 1:] - phi[:, :-1]) / grid.dt
    lap_phi = laplacian(phi, grid)
    gx, gy = grad(phi, grid)
    grad2 = gx**2 + gy**2

    coupling = np.empty_like(phi)
    coupling[S] = params.beta * (conv_phii_rhoi - phi[S] * conv_i_all)
    coupling[I] = params.beta * (phi[I] * conv_s_all - conv_phis_rhos)
    coupling[I] += params.gamma * (phi[R] - phi[I])
    coupling[R] = 0.0

    out: dict[str, float] = {}
    for g in (S, I, R):
        kinetic = grad2[g, 1:] / (2.0 * alpha[g])
        kinetic[-1] = 0.0  # terminal momentum is pinned to zero, not -grad(phi)/alpha
        dual = (
            dtphi[g]
            - kinetic
            + 0.5 * eta[g] ** 2 * lap_phi[g, 1:]
            + params.c * total[1:]
            + coupling[g, 1:]
        )
        support = rho[g, 1:] > 0
        dual = np.where(support, dual, np.minimum(dual, 0.0))
        out[f"dual_{GROUPS[g]}"] = float(residual_norms(dual[None], grid)[0])

    # primal system with the recovered velocity field
    vstate = PopulationState(
        grid, rho, -rho * gx / np.asarray(alpha)[:, None, None, None],
        -rho * gy / np.asarray(alpha)[:, None, None, None], phi
    )
    res, norms = _constraint_residual_from_conv(
        vstate, params, conv_i_all[:-1], conv_s_all[:-1]
    )
    for g in (S, I, R):
        out[f"primal_{GROUPS[g]}"] = float(norms[g])

    mismatch = phi[I, -1] - terminal_gradient(rho[I, -1], cost)
    out["terminal"] = float(np.sqrt(integrate_space(mismatch**2, grid)))
    return out


def mass_series(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Total mass of one density over time: int rho(t,x) dx per node."""
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")
    return np.asarray(integrate_space(field, grid))


def euler_uncontrolled(
    rho0: np.ndarray, beta: float, gamma: float, grid: GridSpec
) -> np.ndarray:
    """No-control baseline: pointwise forward Euler of the local reaction
    system (no kernel, no movement, no diffusion).

    The recovered density is advanced through the exact mass balance
    (total - S - I), which agrees with its Euler update in exact arithmetic
    and keeps the pointwise sum of the three groups from drifting.
    """
    if rho0.shape != (3, grid.nx, grid.ny):
        raise ValueError(f"initial densities must be (3, {grid.nx}, {grid.ny})")
    if np.any(rho0 < 0):
        raise ValueError("initial densities must be nonnegative")
    dt = grid.dt
    total0 = (rho0[S] + rho0[I]) + rho0[R]
    if beta * float(total0.max()) * dt > 1.0 or gamma * dt > 1.0:
        raise ValueError("Euler step too large: density updates could undershoot zero")
    out = np.empty((3, *grid.shape))
    out[:, 0] = rho0
    for n in range(grid.nt - 1):
        s, i = out[S, n], out[I, n]
        infection = dt * beta * s * i
        out[S, n + 1] = s - infection
        out[I, n + 1] = i + (infection - dt * gamma * i)
        out[R, n + 1] = total0 - (out[S, n + 1] + out[I, n + 1])
    return out


def classical_sir(
    s0: float, i0: float, r0: float, beta: float, gamma: float, nt: int
) -> np.ndarray:
    """Forward-Euler solution of the classical three-compartment ODEs on
    nt nodes over [0,1]; returns shape (3, nt).

    Requires proportions (s0+i0+r0 = 1).  The recovered series closes the
    balance, r = 1 - (s+i), so s+i+r evaluates to 1 exactly at every node.
    """
    if (s0 + i0) + r0 != 1.0:
        raise ValueError("initial proportions must sum to one")
    dt = 1.0 / (nt - 1)
    out = np.empty((3, nt))
    out[:, 0] = (s0, i0, r0)
    s, i = s0, i0
    for n in range(1, nt):
        infection = dt * beta * s * i
        s, i = s - infection, i + (infection - dt * gamma * i)
        out[S, n] = s
        out[I, n] = i
        out[R, n] = 1.0 - (s + i)
    return out
