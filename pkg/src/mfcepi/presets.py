"""Initial densities, rates and terminal costs for the built-in experiments.

Densities are stored as closures over (x, y) so tests can probe the exact
formulas; sampling onto a grid happens at cell centers.  All presets start
with no recovered population.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .grid import GridSpec
from .model import TerminalCost

DensityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

PRESET_NAMES = ("exp1", "exp2a", "exp2b", "exp3a", "exp3b")


@dataclasses.dataclass(frozen=True)
class ExperimentPreset:
    name: str
    beta: float
    gamma: float
    density_s: DensityFn
    density_i: DensityFn
    terminal_kind: str
    potential: DensityFn | None = None

    def initial_density(self, grid: GridSpec) -> np.ndarray:
        """Sample (rho_S, rho_I, rho_R) at cell centers; shape (3, nx, ny)."""
        xc, yc = grid.cell_centers()
        out = np.zeros((3, grid.nx, grid.ny))
        out[0] = self.density_s(xc, yc)
        out[1] = self.density_i(xc, yc)
        return out

    def terminal_cost(self, grid: GridSpec) -> TerminalCost:
        if self.terminal_kind == "quadratic":
            return TerminalCost("quadratic")
        xc, yc = grid.cell_centers()
        return TerminalCost("quadratic_plus_potential", self.potential(xc, yc))


def _gaussian(amplitude: float, rate: float, cx: float, cy: float) -> DensityFn:
    def f(x, y):
        return amplitude * np.exp(-rate * ((x - cx) ** 2 + (y - cy) ** 2))

    return f


def _exp2_susceptible(x, y):
    return 0.45 * (
        np.exp(-15.0 * ((x - 0.3) ** 2 + (y - 0.3) ** 2))
        + np.exp(-25.0 * ((x - 0.5) ** 2 + (y - 0.75) ** 2))
        + np.exp(-30.0 * ((x - 0.8) ** 2 + (y - 0.35) ** 2))
    )


def _exp2_infected(x, y):
    bump1 = np.maximum(0.04 - (x - 0.2) ** 2 - (y - 0.65) ** 2, 0.0)
    bump2 = np.maximum(0.03 - (x - 0.5) ** 2 - (y - 0.2) ** 2, 0.0)
    bump3 = np.maximum(0.03 - (x - 0.8) ** 2 - (y - 0.55) ** 2, 0.0)
    return 10.0 * bump1 + 12.0 * bump2 + 12.0 * bump3


def _ball(value: float, radius: float, cx: float, cy: float) -> DensityFn:
    def f(x, y):
        inside = (x - cx) ** 2 + (y - cy) ** 2 < radius**2
        return np.where(inside, value, 0.0)

    return f


def _center_square(x, y):
    inside = (np.abs(x - 0.5) < 0.1) & (np.abs(y - 0.5) < 0.1)
    return np.where(inside, 1.0, 0.0)


def make_preset(name: str) -> ExperimentPreset:
    """Named experiment setups; see PRESET_NAMES for the choices."""
    if name == "exp1":
        return ExperimentPreset(
            name, beta=0.7, gamma=0.1,
            density_s=_gaussian(0.6, 10.0, 0.5, 0.5),
            density_i=_gaussian(0.6, 35.0, 0.6, 0.6),
            terminal_kind="quadratic",
        )
    if name in ("exp2a", "exp2b"):
        return ExperimentPreset(
            name, beta=0.34, gamma=0.12 if name == "exp2a" else 0.36,
            density_s=_exp2_susceptible,
            density_i=_exp2_infected,
            terminal_kind="quadratic",
        )
    if name in ("exp3a", "exp3b"):
        return ExperimentPreset(
            name, beta=0.96 if name == "exp3a" else 0.34, gamma=0.12,
            density_s=_ball(0.4, 0.3, 0.5, 0.5),
            density_i=_ball(0.4, 0.2, 0.5, 0.5),
            terminal_kind="quadratic_plus_potential",
            potential=_center_square,
        )
    raise ValueError(f"unknown preset {name!r}; choose one of {', '.join(PRESET_NAMES)}")
