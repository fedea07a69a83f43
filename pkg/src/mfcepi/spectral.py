"""Space-time elliptic operators used to precondition the dual ascent.

Each population group carries an operator

    -d_tt + biharm * Lap^2 - p * Lap + q

diagonalized by the type-II cosine transform in all three axes (Neumann
closure in space matches the zero-flux walls; the Neumann-in-time closure
is a free choice since the preconditioner only affects convergence speed,
never the fixed point).  The eigenvalue of mode (w, k, l) is

    w^2 + biharm * kappa^4 + p * kappa^2 + q

with w^2 and kappa^2 the cosine symbols of the 1D second differences.
For the recovered group q = 0 and the all-constant mode is null; the
solve projects it to zero (pseudo-inverse convention).
"""

from __future__ import annotations

import dataclasses
import functools

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec
from .kernel import fft_workers


@dataclasses.dataclass(frozen=True)
class PreconditionerCoeffs:
    group: str       # "S", "I" or "R"
    q: float         # zeroth-order coefficient
    p: float         # first-order (negative Laplacian) coefficient
    biharm: float    # biharmonic coefficient

    def __post_init__(self):
        if self.group not in ("S", "I", "R"):
            raise ValueError(f"unknown group {self.group!r}")
        if self.p < 1.0 or self.q < 0.0 or self.biharm < 0.0:
            raise ValueError(f"invalid coefficients p={self.p}, q={self.q}, biharm={self.biharm}")


def preconditioner_coeffs(
    group: str, beta: float, gamma: float, eta_s: float, eta_i: float, eta_r: float,
    mode: str = "paper",
) -> PreconditionerCoeffs:
    """Coefficients of the per-group preconditioner.

    mode="paper" keeps the printed first-order coefficients (which mix the
    susceptible diffusion constant into the infected group and scale it
    linearly); mode="corrected" uses the cross terms a direct expansion of
    the linearized constraint operator produces (eta^2 scaling, each group
    with its own eta).  Both are valid preconditioners.
    """
    if mode not in ("paper", "corrected"):
        raise ValueError(f"unknown preconditioner mode {mode!r}")
    if group == "S":
        p = 1.0 + 2.0 * beta * eta_s if mode == "paper" else 1.0 + beta * eta_s**2
        return PreconditionerCoeffs("S", beta**2, p, eta_s**4 / 4.0)
    if group == "I":
        rate = gamma + beta
        p = 1.0 + 2.0 * rate * eta_s if mode == "paper" else 1.0 + rate * eta_i**2
        return PreconditionerCoeffs("I", rate**2, p, eta_i**4 / 4.0)
    if group == "R":
        return PreconditionerCoeffs("R", 0.0, 1.0, eta_r**4 / 4.0)
    raise ValueError(f"unknown group {group!r}")


@functools.lru_cache(maxsize=32)
def _eigenvalues(coeffs: PreconditionerCoeffs, grid: GridSpec) -> np.ndarray:
    w2 = (2.0 - 2.0 * np.cos(np.pi * np.arange(grid.nt) / grid.nt)) / grid.dt**2
    kx2 = (2.0 - 2.0 * np.cos(np.pi * np.arange(grid.nx) / grid.nx)) / grid.dx**2
    ky2 = (2.0 - 2.0 * np.cos(np.pi * np.arange(grid.ny) / grid.ny)) / grid.dy**2
    kappa2 = kx2[:, None] + ky2[None, :]
    lam = w2[:, None, None] + coeffs.biharm * kappa2**2 + coeffs.p * kappa2 + coeffs.q
    return lam


@functools.lru_cache(maxsize=32)
def _inverse_eigenvalues(coeffs: PreconditionerCoeffs, grid: GridSpec) -> np.ndarray:
    lam = _eigenvalues(coeffs, grid).copy()
    if coeffs.q == 0.0:
        lam[0, 0, 0] = np.inf  # null constant mode -> projected to zero
    return 1.0 / lam


def _dct3(u: np.ndarray) -> np.ndarray:
    return sfft.dctn(u, type=2, norm="ortho", axes=(-3, -2, -1), workers=fft_workers())


def _idct3(u: np.ndarray) -> np.ndarray:
    return sfft.idctn(u, type=2, norm="ortho", axes=(-3, -2, -1), workers=fft_workers())


def apply_elliptic(u: np.ndarray, coeffs: PreconditionerCoeffs, grid: GridSpec) -> np.ndarray:
    """Apply the group's space-time elliptic operator spectrally."""
    if u.shape[-3:] != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite input field")
    return _idct3(_dct3(u) * _eigenvalues(coeffs, grid))


def solve_elliptic(b: np.ndarray, coeffs: PreconditionerCoeffs, grid: GridSpec) -> np.ndarray:
    """Invert the operator; for q=0 the constant mode of b is discarded."""
    if b.shape[-3:] != grid.shape:
        raise ValueError(f"field shape {b.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("non-finite right-hand side")
    return _idct3(_dct3(b) * _inverse_eigenvalues(coeffs, grid))
