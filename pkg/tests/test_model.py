"""Objective, terminal cost, residual diagnostics, and mass bookkeeping."""

import numpy as np
import pytest
from scipy.special import erf

from mfcepi import (
    convolve,
    GridSpec,
    ModelParams,
    PopulationState,
    TerminalCost,
    build_kernel,
    constraint_residual,
    integrate_space,
    kkt_residual,
    make_preset,
    mass_series,
    objective,
    terminal_energy,
    terminal_gradient,
)
from mfcepi.grid import time_weights

RNG = np.random.default_rng(99)


def random_state(grid, positive=True):
    state = PopulationState.zeros(grid)
    state.rho = RNG.random((3, *grid.shape)) + (0.1 if positive else 0.0)
    state.mx = 0.3 * RNG.standard_normal((3, *grid.shape))
    state.my = 0.3 * RNG.standard_normal((3, *grid.shape))
    state.phi = RNG.standard_normal((3, *grid.shape))
    return state


class TestModelParams:
    def test_defaults_match_experiment_setup(self):
        p = ModelParams()
        assert (p.sigma1, p.sigma2) == (0.02, 0.02)
        assert p.c == 0.01
        assert p.eta == (0.01, 0.01, 0.01)
        assert p.alpha == (1.0, 10.0, 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(beta=-0.1)
        with pytest.raises(ValueError):
            ModelParams(alpha_i=0.0)
        with pytest.raises(ValueError):
            ModelParams(c=-1.0)


class TestTerminalCost:
    def test_quadratic_rejects_potential(self):
        with pytest.raises(ValueError):
            TerminalCost("quadratic", np.ones((4, 4)))

    def test_potential_kind_requires_potential(self):
        with pytest.raises(ValueError):
            TerminalCost("quadratic_plus_potential")

    def test_negative_potential_rejected(self):
        with pytest.raises(ValueError):
            TerminalCost("quadratic_plus_potential", -np.ones((4, 4)))

    def test_gradient_zero_slice(self):
        assert np.all(terminal_gradient(np.zeros((4, 4)), TerminalCost()) == 0)

    def test_gradient_potential_kind_on_zero(self):
        v = RNG.random((4, 4))
        cost = TerminalCost("quadratic_plus_potential", v)
        assert np.array_equal(terminal_gradient(np.zeros((4, 4)), cost), v)

    @pytest.mark.parametrize("kind", ["quadratic", "quadratic_plus_potential"])
    def test_gradient_matches_central_difference(self, kind):
        grid = GridSpec(8, 8, 2)
        v = RNG.random((8, 8)) if kind == "quadratic_plus_potential" else None
        cost = TerminalCost(kind, v)
        rho = RNG.random((8, 8))
        h = RNG.standard_normal((8, 8))
        eps = 1e-5
        fd = (
            terminal_energy(rho + eps * h, cost, grid)
            - terminal_energy(rho - eps * h, cost, grid)
        ) / (2 * eps)
        pairing = integrate_space(terminal_gradient(rho, cost) * h, grid)
        assert fd == pytest.approx(pairing, abs=1e-9)


class TestObjective:
    def test_zero_state(self):
        grid = GridSpec(8, 8, 4)
        state = PopulationState.zeros(grid)
        assert objective(state, ModelParams(), TerminalCost()) == 0.0

    def test_constant_congestion_value(self):
        grid = GridSpec(8, 8, 4)
        state = PopulationState.zeros(grid)
        s = 0.37
        state.rho[0] = s  # susceptible group only; terminal cost sees rho_I = 0
        params = ModelParams(c=0.01)
        assert objective(state, params, TerminalCost()) == pytest.approx(
            0.5 * params.c * s**2, rel=1e-12
        )

    def test_matches_direct_loop_oracle(self):
        grid = GridSpec(8, 8, 4)
        state = random_state(grid)
        params = ModelParams(c=0.03)
        cost = TerminalCost()
        w = time_weights(grid)
        total = 0.0
        for n in range(grid.nt):
            for k in range(grid.nx):
                for l in range(grid.ny):
                    cell = 0.0
                    for g, alpha in enumerate(params.alpha):
                        m2 = state.mx[g, n, k, l] ** 2 + state.my[g, n, k, l] ** 2
                        cell += 0.5 * alpha * m2 / state.rho[g, n, k, l]
                    tot = sum(state.rho[g, n, k, l] for g in range(3))
                    cell += 0.5 * params.c * tot**2
                    total += w[n] * cell * grid.dx * grid.dy
        for k in range(grid.nx):
            for l in range(grid.ny):
                total += 0.5 * state.rho[1, -1, k, l] ** 2 * grid.dx * grid.dy
        assert objective(state, params, cost) == pytest.approx(total, rel=1e-12)

    def test_zero_density_zero_momentum_is_finite(self):
        grid = GridSpec(8, 8, 2)
        state = PopulationState.zeros(grid)
        state.rho[0, :, :4] = 1.0
        assert np.isfinite(objective(state, ModelParams(), TerminalCost()))

    def test_moving_mass_without_density_is_infinite(self):
        grid = GridSpec(8, 8, 2)
        state = PopulationState.zeros(grid)
        state.mx[0, 0, 2, 2] = 0.5
        assert objective(state, ModelParams(), TerminalCost()) == float("inf")

    def test_nonnegative_when_cost_nonnegative(self):
        grid = GridSpec(8, 8, 3)
        for _ in range(5):
            state = random_state(grid)
            assert objective(state, ModelParams(), TerminalCost()) >= 0


class TestConstraintResidual:
    def test_zero_state(self):
        grid = GridSpec(8, 8, 4)
        params = ModelParams()
        op = build_kernel(grid, params.sigma1, params.sigma2)
        res, norms = constraint_residual(PopulationState.zeros(grid), params, op)
        assert res.shape == (3, grid.nt - 1, grid.nx, grid.ny)
        assert np.all(res == 0) and np.all(norms == 0)

    def test_euler_trajectory_truncation_order(self):
        # reference trajectory: many fine Euler steps of the nonlocal
        # reaction system, restricted to coarse time nodes; the discrete
        # residual of that trajectory is the time-stamp truncation error,
        # first order in dt, so it halves when nt doubles
        preset = make_preset("exp1")
        params = ModelParams(
            beta=preset.beta, gamma=preset.gamma,
            eta_s=0.0, eta_i=0.0, eta_r=0.0, sigma1=0.1, sigma2=0.1,
        )
        norms_by_nt = {}
        substeps = 64
        for nt in (17, 33):
            grid = GridSpec(16, 16, nt)
            op = build_kernel(grid, params.sigma1, params.sigma2)
            dt_fine = grid.dt / substeps
            rho = np.empty((3, *grid.shape))
            rho[:, 0] = preset.initial_density(grid)
            y = rho[:, 0].copy()
            for n in range(grid.nt - 1):
                for _ in range(substeps):
                    loss_s = params.beta * y[0] * convolve(op, y[1])
                    gain_i = params.beta * y[1] * convolve(op, y[0])
                    recovery = params.gamma * y[1]
                    y = y + dt_fine * np.stack(
                        [-loss_s, gain_i - recovery, recovery]
                    )
                rho[:, n + 1] = y
            state = PopulationState.zeros(grid)
            state.rho = rho
            _, norms = constraint_residual(state, params, op)
            norms_by_nt[nt] = np.max(norms)
        ratio = norms_by_nt[17] / norms_by_nt[33]
        assert 1.6 < ratio < 2.4

    def test_mass_identity_bounds_time_derivative(self):
        # d/dt of total mass per row is controlled by the summed residuals
        grid = GridSpec(12, 12, 6)
        params = ModelParams(beta=0.5, gamma=0.2, c=0.0)
        op = build_kernel(grid, params.sigma1, params.sigma2)
        state = random_state(grid)
        res, _ = constraint_residual(state, params, op)
        total = state.rho.sum(axis=0)
        masses = integrate_space(total, grid)
        for n in range(grid.nt - 1):
            lhs = abs((masses[n + 1] - masses[n]) / grid.dt)
            rhs = abs(integrate_space(res.sum(axis=0)[n], grid))
            l1 = integrate_space(np.abs(res.sum(axis=0)[n]), grid)
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)
            assert lhs <= l1 + 1e-12


class TestKKTResidual:
    def test_zero_state_all_zero(self):
        grid = GridSpec(8, 8, 4)
        params = ModelParams(c=0.0)
        op = build_kernel(grid, params.sigma1, params.sigma2)
        out = kkt_residual(PopulationState.zeros(grid), params, op, TerminalCost())
        assert all(v == 0.0 for v in out.values())

    def test_constant_multipliers_zero_density(self):
        grid = GridSpec(8, 8, 4)
        params = ModelParams(c=0.0)
        op = build_kernel(grid, params.sigma1, params.sigma2)
        state = PopulationState.zeros(grid)
        for g, value in enumerate((2.0, 1.0, 3.0)):
            state.phi[g] = value
        out = kkt_residual(state, params, op, TerminalCost())
        for key in ("dual_S", "dual_I", "dual_R", "primal_S", "primal_I", "primal_R"):
            assert out[key] == 0.0


class TestMassSeries:
    def test_unit_density(self):
        grid = GridSpec(8, 8, 5)
        assert np.allclose(mass_series(np.ones(grid.shape), grid), 1.0)

    def test_initial_recovered_mass_is_zero(self):
        grid = GridSpec(32, 32, 4)
        rho0 = make_preset("exp1").initial_density(grid)
        field = np.broadcast_to(rho0[2], grid.shape).copy()
        assert np.all(mass_series(field, grid) == 0.0)

    def test_exp1_susceptible_against_erf(self):
        grid = GridSpec(128, 128, 3)
        rho0 = make_preset("exp1").initial_density(grid)
        field = np.broadcast_to(rho0[0], grid.shape).copy()
        one_dim = np.sqrt(np.pi / 10.0) * erf(np.sqrt(10.0) * 0.5)
        assert mass_series(field, grid)[0] == pytest.approx(0.6 * one_dim**2, abs=1e-3)
