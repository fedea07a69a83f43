"""Preconditioned primal-dual iteration for the velocity-control problem.

Each sweep performs, for every population group:

  1. a proximal density update solved in closed form as the nonnegative
     root of a cubic (one scalar problem per space-time cell),
  2. a closed-form momentum shrinkage,
  3. a dual ascent preconditioned by the inverse of the group's space-time
     elliptic operator, followed by over-relaxation (extrapolation) and
     re-imposition of the terminal multiplier values.

Couplings between groups always use the previous sweep's fields (Jacobi
style), so a sweep is a deterministic function of the iterate.  The loop
stops when the relative change of the objective falls below tolerance.
On numerical blow-up the step sizes are halved (up to six times) and the
solve restarts from scratch.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from .grid import GridSpec, div, grad, laplacian
from .kernel import KernelOp, build_kernel, convolve
from .model import (
    GROUPS,
    I,
    ModelParams,
    PopulationState,
    R,
    S,
    TerminalCost,
    _constraint_residual_from_conv,
    kkt_residual,
    mass_series,
    objective,
    terminal_gradient,
)
from .presets import ExperimentPreset
from .spectral import PreconditionerCoeffs, preconditioner_coeffs, solve_elliptic


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    tau_s: float = 0.1
    tau_i: float = 0.1
    tau_r: float = 0.1
    sigma_s: float = 0.1
    sigma_i: float = 0.1
    sigma_r: float = 0.1
    tol: float = 1e-6
    max_iter: int = 50_000
    preconditioner: str = "paper"
    log_every: int = 50

    def __post_init__(self):
        if min(self.tau_s, self.tau_i, self.tau_r) <= 0:
            raise ValueError("primal step sizes must be positive")
        if min(self.sigma_s, self.sigma_i, self.sigma_r) <= 0:
            raise ValueError("dual step sizes must be positive")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.preconditioner not in ("paper", "corrected"):
            raise ValueError(f"unknown preconditioner mode {self.preconditioner!r}")

    @property
    def tau(self) -> tuple[float, float, float]:
        return (self.tau_s, self.tau_i, self.tau_r)

    @property
    def sigma(self) -> tuple[float, float, float]:
        return (self.sigma_s, self.sigma_i, self.sigma_r)

    def halved(self) -> "SolverOptions":
        return dataclasses.replace(
            self,
            tau_s=self.tau_s / 2, tau_i=self.tau_i / 2, tau_r=self.tau_r / 2,
            sigma_s=self.sigma_s / 2, sigma_i=self.sigma_i / 2, sigma_r=self.sigma_r / 2,
        )


@dataclasses.dataclass
class RunReport:
    """Per-iteration trace of one solve."""

    iterations: int = 0
    converged: bool = False
    step_halvings: int = 0
    objective: np.ndarray = dataclasses.field(default_factory=lambda: np.empty(0))
    rel_error: np.ndarray = dataclasses.field(default_factory=lambda: np.empty(0))
    residual_norms: np.ndarray = dataclasses.field(default_factory=lambda: np.empty((0, 3)))
    iter_seconds: np.ndarray = dataclasses.field(default_factory=lambda: np.empty(0))
    kkt_iterations: list[int] = dataclasses.field(default_factory=list)
    kkt_norms: list[dict[str, float]] = dataclasses.field(default_factory=list)
    mass: np.ndarray = dataclasses.field(default_factory=lambda: np.empty((3, 0)))


class SolverDivergenceError(RuntimeError):
    """Raised when the iteration produces non-finite values even after the
    automatic step-size backoff; carries the offending iterate."""

    def __init__(self, message: str, state: PopulationState | None = None):
        super().__init__(message)
        self.state = state


def root_plus(a, b, c) -> np.ndarray:
    """Largest nonnegative root of x^3 + a x^2 + b x + c = 0 (elementwise).

    At the density-update call sites b = 0 and c <= 0, which guarantees a
    unique nonnegative root directed by the momentum pull |c|; that case is
    solved by a bracketed Newton iteration (monotone from above).  Other
    signatures go through the closed form (Cardano / trigonometric) with a
    Newton polish.  A residual check re-solves any stray cell; raises if no
    real root is nonnegative.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.ndim == 0 and b == 0.0 and np.all(c <= 0.0):
        x = _root_nonneg(a, c)
        a, b, c = np.broadcast_arrays(a, b, c)
    else:
        a, b, c = np.broadcast_arrays(a, b, c)
        x = _root_general(a, b, c)
    scale = np.maximum(1.0, np.abs(a) ** 3)
    bad = np.abs(((x + a) * x + b) * x + c) > 1e-10 * scale
    rescue = bad & (b == 0) & (c < 0)
    if np.any(rescue):
        x[rescue] = _root_nonneg(a[rescue], c[rescue], steps=60)
        bad &= ~rescue
    if np.any(bad):
        # off-call-site signatures: fall back to exact root enumeration
        flat_x, flat_a, flat_b, flat_c = (arr.reshape(-1) for arr in (x, a, b, c))
        for idx in np.flatnonzero(bad.reshape(-1)):
            roots = np.roots([1.0, flat_a[idx], flat_b[idx], flat_c[idx]])
            real = roots[np.abs(roots.imag) < 1e-8 * np.maximum(1.0, np.abs(roots.real))].real
            flat_x[idx] = real.max() if real.size else -1.0
        x = flat_x.reshape(x.shape)
    linscale = np.maximum(1.0, np.abs(a))
    if np.any(x < -1e-8 * linscale):
        raise FloatingPointError("cubic has no nonnegative root at some cell")
    return np.maximum(x, 0.0)


def _root_nonneg(a: np.ndarray, c: np.ndarray, steps: int = 6) -> np.ndarray:
    """Unique nonnegative root of x^3 + a x^2 + c with c <= 0, by Newton
    from an upper bound where the cubic is convex increasing, so the
    iteration decreases monotonically onto the root.

    Starting points above the root: for a >= 0 both cbrt(-c) and
    sqrt(-c/a) give f >= 0; for a < 0, -a + cbrt(-c) does.
    """
    cr = np.cbrt(-c)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        tight = np.sqrt(np.where(a > 0, -c / np.where(a > 0, a, 1.0), np.inf))
    x = np.where(a >= 0.0, np.minimum(cr, tight), cr - a)
    for _ in range(steps):
        f = (x + a) * x * x + c
        fp = (3.0 * x + 2.0 * a) * x
        good = fp > 0
        x = np.where(good, x - f / np.where(good, fp, 1.0), x)
    return x


def _root_general(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Largest real root by closed form (Cardano / trigonometric), with
    discriminants inside rounding noise routed through the three-root
    branch, which lands on the largest root at double-root boundaries."""
    third_a = a / 3.0
    p3 = b / 3.0 - third_a * third_a  # p/3
    q = (2.0 * third_a * third_a - b) * third_a + c
    half_q = 0.5 * q
    disc = half_q * half_q + p3 * p3 * p3
    one_real = disc > 1e-10 * (half_q * half_q + np.abs(p3) ** 3)
    s = np.sqrt(np.maximum(disc, 0.0))
    t_single = np.cbrt(-half_q + s) + np.cbrt(-half_q - s)
    r = np.sqrt(np.maximum(-p3, 0.0))
    r3 = np.maximum(r * r * r, np.finfo(float).tiny)
    with np.errstate(over="ignore"):
        cosarg = np.clip(-half_q / r3, -1.0, 1.0)
    t_multi = 2.0 * r * np.cos(np.arccos(cosarg) / 3.0)
    x = np.where(one_real, t_single, t_multi) - third_a
    for _ in range(2):
        f = ((x + a) * x + b) * x + c
        fp = (3.0 * x + 2.0 * a) * x + b
        safe = np.abs(fp) > 0
        x = np.where(safe, x - f / np.where(safe, fp, 1.0), x)
    # exact clamp case: x^2 (x + a) = 0
    return np.where((b == 0) & (c == 0), np.maximum(-a, 0.0), x)


def _kernel_fields(state: PopulationState, kernel_op: KernelOp) -> dict[str, np.ndarray]:
    """The four kernel convolutions a density sweep consumes, batched into
    a single transform: K*rho_I, K*rho_S, K*(phi_I rho_I), K*(phi_S rho_S)."""
    stack = np.stack(
        [
            state.rho[I],
            state.rho[S],
            state.phi[I] * state.rho[I],
            state.phi[S] * state.rho[S],
        ]
    )
    out = convolve(kernel_op, stack)
    return {
        "k_rho_i": out[0],
        "k_rho_s": out[1],
        "k_phii_rhoi": out[2],
        "k_phis_rhos": out[3],
    }


def _dt_backward(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Backward time difference, the exact adjoint pairing of the
    forward-difference transport rows: row n of the constraint couples the
    multiplier value at row n to densities at rows n and n+1, so the
    density gradient at row j sees (phi[j] - phi[j-1]) / dt.  Row 0 is set
    to zero (the initial densities are data, not variables)."""
    out = np.zeros_like(u)
    out[1:] = (u[1:] - u[:-1]) / grid.dt
    return out


def update_rho(
    group: str,
    state: PopulationState,
    params: ModelParams,
    kernel_op: KernelOp,
    opts: SolverOptions,
    conv: dict[str, np.ndarray] | None = None,
    lap_phi: np.ndarray | None = None,
) -> np.ndarray:
    """Proximal density update for one group; the initial row is fixed.

    The cubic's quadratic coefficient collects the time-and-space drift of
    the group's multiplier, the previous density, the kernel couplings and
    the congestion pressure of the other groups; the constant coefficient
    carries the kinetic pull of the current momentum.
    """
    g = GROUPS.index(group)
    grid = state.grid
    if conv is None:
        conv = _kernel_fields(state, kernel_op)
    if lap_phi is None:
        lap_phi = laplacian(state.phi[g], grid)
    tau = opts.tau[g]
    scale = tau / (1.0 + params.c * tau)
    phi_g = state.phi[g]
    drift = _dt_backward(phi_g, grid) + 0.5 * params.eta[g] ** 2 * lap_phi
    drift -= state.rho[g] / tau
    if g == S:
        drift += params.beta * (conv["k_phii_rhoi"] - state.phi[S] * conv["k_rho_i"])
        drift += params.c * (state.rho[I] + state.rho[R])
    elif g == I:
        drift += params.beta * (state.phi[I] * conv["k_rho_s"] - conv["k_phis_rhos"])
        drift += params.gamma * (state.phi[R] - state.phi[I])
        drift += params.c * (state.rho[S] + state.rho[R])
    else:
        drift += params.c * (state.rho[S] + state.rho[I])
    m2 = state.mx[g] ** 2 + state.my[g] ** 2
    const = -(tau * params.alpha[g] / (2.0 * (1.0 + params.c * tau))) * m2
    new = root_plus(scale * drift, 0.0, const)
    new[0] = state.rho[g, 0]
    return new


def update_m(
    group: str,
    state: PopulationState,
    params: ModelParams,
    opts: SolverOptions,
    grad_phi: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Momentum update for one group given the already-updated density in
    state.rho: a pure shrinkage of m - tau*grad(phi), vanishing wherever
    the density vanishes.

    The final time row stays zero: the transport rows are evaluated at
    left nodes, so the terminal momentum is a dead degree of freedom that
    only adds cost (and, unanchored by any constraint, would otherwise
    integrate the terminal multiplier's gradient without bound).
    """
    g = GROUPS.index(group)
    tau = opts.tau[g]
    factor = state.rho[g] / (tau * params.alpha[g] + state.rho[g])
    gx, gy = grad(state.phi[g], state.grid) if grad_phi is None else grad_phi
    mx = factor * (state.mx[g] - tau * gx)
    my = factor * (state.my[g] - tau * gy)
    mx[-1] = 0.0
    my[-1] = 0.0
    return mx, my


def dual_ascend(
    phi: np.ndarray,
    residual_rows: np.ndarray,
    coeffs: PreconditionerCoeffs,
    sigma: float,
    grid: GridSpec,
) -> np.ndarray:
    """One preconditioned ascent step: phi + sigma * Op^{-1}(-residual).

    The transport residual lives on the first nt-1 time rows; the final
    row of the right-hand side is zero (the terminal multiplier is imposed
    separately)."""
    rhs = np.zeros(grid.shape)
    rhs[:-1] = -residual_rows
    return phi + sigma * solve_elliptic(rhs, coeffs, grid)


def impose_terminal_phi(
    phi: np.ndarray, rho_i_final: np.ndarray, cost: TerminalCost
) -> None:
    """Overwrite terminal multiplier rows in place: the infected multiplier
    matches the terminal-cost gradient, the others have no terminal cost."""
    phi[S, -1] = 0.0
    phi[R, -1] = 0.0
    phi[I, -1] = terminal_gradient(rho_i_final, cost)


def update_phi(
    group: str,
    state: PopulationState,
    params: ModelParams,
    kernel_op: KernelOp,
    opts: SolverOptions,
    cost: TerminalCost,
    phi_prev: np.ndarray | None = None,
) -> np.ndarray:
    """Dual update for one group on a state whose rho and m are current:
    preconditioned ascent, extrapolation, then terminal rows re-imposed.
    phi_prev is the previous (un-extrapolated) multiplier; defaults to the
    one in the state."""
    g = GROUPS.index(group)
    grid = state.grid
    rho_left = state.rho[:, :-1]
    conv_i = convolve(kernel_op, rho_left[I])
    conv_s = convolve(kernel_op, rho_left[S])
    res, _ = _constraint_residual_from_conv(state, params, conv_i, conv_s)
    coeffs = preconditioner_coeffs(
        group, params.beta, params.gamma, params.eta_s, params.eta_i, params.eta_r,
        mode=opts.preconditioner,
    )
    if phi_prev is None:
        phi_prev = state.phi[g]
    half = dual_ascend(phi_prev, res[g], coeffs, opts.sigma[g], grid)
    if group == "I":
        half[-1] = terminal_gradient(state.rho[I, -1], cost)
    else:
        half[-1] = 0.0
    new = 2.0 * half - phi_prev
    if group == "I":
        new[-1] = terminal_gradient(state.rho[I, -1], cost)
    else:
        new[-1] = 0.0
    return new


def _run_iteration(
    state: PopulationState,
    phi_prev: np.ndarray,
    params: ModelParams,
    kernel_op: KernelOp,
    opts: SolverOptions,
    cost: TerminalCost,
    coeffs: dict[str, PreconditionerCoeffs],
) -> tuple[PopulationState, np.ndarray, np.ndarray]:
    """One full sweep; returns (new state, new phi_prev, residual norms)."""
    grid = state.grid
    conv = _kernel_fields(state, kernel_op)
    phi_gx, phi_gy = grad(state.phi, grid)
    lap_phi = div(phi_gx, phi_gy, grid)
    new = PopulationState(
        grid,
        np.stack(
            [
                update_rho(g, state, params, kernel_op, opts, conv, lap_phi[i])
                for i, g in enumerate(GROUPS)
            ]
        ),
        state.mx, state.my, state.phi,
    )
    mxy = [
        update_m(g, new, params, opts, (phi_gx[i], phi_gy[i]))
        for i, g in enumerate(GROUPS)
    ]
    new.mx = np.stack([m[0] for m in mxy])
    new.my = np.stack([m[1] for m in mxy])

    rho_left = new.rho[:, :-1]
    conv_new = convolve(kernel_op, np.stack([rho_left[I], rho_left[S]]))
    res, norms = _constraint_residual_from_conv(new, params, conv_new[0], conv_new[1])

    phi_half = np.stack(
        [
            dual_ascend(phi_prev[g], res[g], coeffs[GROUPS[g]], opts.sigma[g], grid)
            for g in (S, I, R)
        ]
    )
    impose_terminal_phi(phi_half, new.rho[I, -1], cost)
    phi_bar = 2.0 * phi_half - phi_prev
    impose_terminal_phi(phi_bar, new.rho[I, -1], cost)
    new.phi = phi_bar
    return new, phi_half, norms


def initial_state(
    preset: ExperimentPreset, grid: GridSpec, cost: TerminalCost
) -> PopulationState:
    """Densities held constant in time at the initial data (kinetic term
    finite at iteration zero), zero momentum, zero multipliers apart from
    the imposed terminal rows."""
    state = PopulationState.zeros(grid)
    rho0 = preset.initial_density(grid)
    state.rho[:] = rho0[:, None, :, :]
    impose_terminal_phi(state.phi, state.rho[I, -1], cost)
    return state


def solve(
    preset: ExperimentPreset,
    grid: GridSpec,
    params: ModelParams,
    opts: SolverOptions,
) -> tuple[PopulationState, RunReport]:
    """Run the primal-dual iteration for one experiment preset.

    Returns the final state and the iteration trace.  If the iteration cap
    is reached the result is still returned with report.converged False.
    """
    kernel_op = build_kernel(grid, params.sigma1, params.sigma2)
    cost = preset.terminal_cost(grid)
    attempt_opts = opts
    for attempt in range(7):
        result = _solve_once(preset, grid, params, attempt_opts, kernel_op, cost)
        if result is not None:
            state, report = result
            report.step_halvings = attempt
            return state, report
        attempt_opts = attempt_opts.halved()
    raise SolverDivergenceError(
        f"iteration still produced non-finite values after 6 step halvings "
        f"(preset {preset.name}, grid {grid.nx}x{grid.ny}x{grid.nt})"
    )


def _solve_once(
    preset: ExperimentPreset,
    grid: GridSpec,
    params: ModelParams,
    opts: SolverOptions,
    kernel_op: KernelOp,
    cost: TerminalCost,
) -> tuple[PopulationState, RunReport] | None:
    """One attempt at the full iteration; None signals a blow-up that the
    caller should retry with halved steps."""
    coeffs = {
        g: preconditioner_coeffs(
            g, params.beta, params.gamma, params.eta_s, params.eta_i, params.eta_r,
            mode=opts.preconditioner,
        )
        for g in GROUPS
    }
    state = initial_state(preset, grid, cost)
    phi_prev = state.phi.copy()

    p_init = objective(state, params, cost)
    if not np.isfinite(p_init):
        raise SolverDivergenceError("objective not finite at initialization", state)
    p_old = p_init
    obj_trace = [p_init]
    rel_trace: list[float] = []
    norm_trace: list[np.ndarray] = []
    sec_trace: list[float] = []
    kkt_iters: list[int] = []
    kkt_trace: list[dict[str, float]] = []

    report = RunReport()
    converged = False
    iteration = 0
    divergence_cap = 10.0 * max(p_init, 1e-30)
    while iteration < opts.max_iter:
        tic = time.perf_counter()
        state, phi_prev, norms = _run_iteration(
            state, phi_prev, params, kernel_op, opts, cost, coeffs
        )
        p_new = objective(state, params, cost)
        sec_trace.append(time.perf_counter() - tic)
        iteration += 1
        if not np.isfinite(p_new) or p_new > divergence_cap:
            return None
        rel = abs(p_new - p_old) / abs(p_old) if p_old != 0 else abs(p_new - p_old)
        obj_trace.append(p_new)
        rel_trace.append(rel)
        norm_trace.append(norms)
        if iteration % opts.log_every == 0 or iteration == 1:
            kkt_iters.append(iteration)
            kkt_trace.append(kkt_residual(state, params, kernel_op, cost))
        p_old = p_new
        if rel < opts.tol:
            converged = True
            break

    report.iterations = iteration
    report.converged = converged
    report.objective = np.asarray(obj_trace)
    report.rel_error = np.asarray(rel_trace)
    report.residual_norms = np.asarray(norm_trace)
    report.iter_seconds = np.asarray(sec_trace)
    if not kkt_iters or kkt_iters[-1] != iteration:
        kkt_iters.append(iteration)
        kkt_trace.append(kkt_residual(state, params, kernel_op, cost))
    report.kkt_iterations = kkt_iters
    report.kkt_norms = kkt_trace
    report.mass = np.stack([mass_series(state.rho[g], grid) for g in (S, I, R)])
    return state, report
