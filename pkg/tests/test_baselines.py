"""Uncontrolled baselines: pointwise Euler reaction system and the classical
three-compartment ODE."""

import numpy as np
import pytest

from mfcepi import GridSpec, classical_sir, euler_uncontrolled, make_preset


def rk4_reference(rho0, beta, gamma, grid, substeps=100):
    """High-accuracy oracle: classic fourth-order steps at dt/substeps,
    landing exactly on the coarse time nodes."""

    def rhs(y):
        s, i, r = y
        inf = beta * s * i
        return np.stack([-inf, inf - gamma * i, gamma * i])

    h = grid.dt / substeps
    out = np.empty((3, *grid.shape))
    out[:, 0] = rho0
    y = rho0.astype(float).copy()
    for n in range(grid.nt - 1):
        for _ in range(substeps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[:, n + 1] = y
    return out


class TestEulerUncontrolled:
    def test_no_infection_stays_constant(self):
        grid = GridSpec(8, 8, 6)
        rho0 = np.zeros((3, 8, 8))
        rho0[0] = np.linspace(0, 1, 64).reshape(8, 8)
        out = euler_uncontrolled(rho0, 0.7, 0.1, grid)
        for n in range(grid.nt):
            assert np.array_equal(out[:, n], rho0)

    def test_exp1_monotonicity(self):
        grid = GridSpec(32, 32, 16)
        rho0 = make_preset("exp1").initial_density(grid)
        out = euler_uncontrolled(rho0, 0.7, 0.1, grid)
        assert np.all(np.diff(out[0], axis=0) <= 0)  # susceptible never grows
        assert np.all(np.diff(out[2], axis=0) >= 0)  # recovered never shrinks
        assert np.all(out >= 0)

    def test_pointwise_conservation(self):
        grid = GridSpec(16, 16, 33)
        rho0 = make_preset("exp1").initial_density(grid)
        out = euler_uncontrolled(rho0, 0.7, 0.1, grid)
        total0 = (out[0, 0] + out[1, 0]) + out[2, 0]
        for n in range(grid.nt):
            drift = (out[0, n] + out[1, n]) + out[2, n] - total0
            assert np.max(np.abs(drift)) == 0.0

    def test_first_order_against_rk4(self):
        preset = make_preset("exp1")
        errors = {}
        for nt in (32, 63):  # dt exactly halves: 1/31 -> 1/62
            grid = GridSpec(16, 16, nt)
            rho0 = preset.initial_density(grid)
            coarse = euler_uncontrolled(rho0, preset.beta, preset.gamma, grid)
            fine = rk4_reference(rho0, preset.beta, preset.gamma, grid)
            errors[nt] = np.max(np.abs(coarse - fine))
        assert 1.8 < errors[32] / errors[63] < 2.2

    def test_unstable_step_rejected(self):
        grid = GridSpec(8, 8, 2)  # dt = 1
        rho0 = np.full((3, 8, 8), 2.0)
        with pytest.raises(ValueError):
            euler_uncontrolled(rho0, 0.7, 0.1, grid)


class TestClassicalSIR:
    def test_no_infected_is_constant(self):
        out = classical_sir(0.8, 0.0, 0.2, 0.7, 0.1, 50)
        assert np.all(out[0] == 0.8)
        assert np.all(out[1] == 0.0)

    def test_geometric_decay_without_infection(self):
        nt = 20
        out = classical_sir(0.9, 0.1, 0.0, 0.0, 0.5, nt)
        dt = 1.0 / (nt - 1)
        expected = 0.1 * (1.0 - 0.5 * dt) ** np.arange(nt)
        assert np.allclose(out[1], expected, rtol=1e-13)

    def test_exact_conservation(self):
        out = classical_sir(0.9, 0.1, 0.0, 0.7, 0.1, 1000)
        sums = (out[0] + out[1]) + out[2]
        assert np.all(sums == 1.0)

    def test_matches_refined_reference(self):
        coarse = classical_sir(0.9, 0.1, 0.0, 0.7, 0.1, 1000)
        fine = classical_sir(0.9, 0.1, 0.0, 0.7, 0.1, 99901)  # dt / 100
        assert np.max(np.abs(coarse[:, -1] - fine[:, -1])) < 1e-3

    def test_rejects_bad_proportions(self):
        with pytest.raises(ValueError):
            classical_sir(0.9, 0.3, 0.0, 0.7, 0.1, 10)
