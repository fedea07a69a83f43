"""Gaussian interaction kernel and its fast application to density slices.

The nonlocal infection pressure at x is the integral of K(x-y) rho(y) over
the unit square, approximated with midpoint quadrature on the cell centers.
The kernel is sampled on the (2nx-1) x (2ny-1) grid of center differences
and applied by zero-padded (linear) FFT convolution, so opposite walls are
never coupled — mass outside the domain simply contributes nothing, and
row masses fall below one near the boundary.
"""

from __future__ import annotations

import dataclasses
import math
import os

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec


def fft_workers() -> int:
    """Worker count for batched transforms; capped by MFCEPI_THREADS."""
    n = os.cpu_count() or 1
    cap = os.environ.get("MFCEPI_THREADS")
    if cap:
        n = max(1, min(n, int(cap)))
    return n


@dataclasses.dataclass(frozen=True, eq=False)
class KernelOp:
    """Prepared convolution operator for one grid and kernel width pair."""

    grid: GridSpec
    sigma1: float
    sigma2: float
    stamp: np.ndarray        # kernel sampled at cell-center differences
    stamp_hat: np.ndarray    # rfft2 of the zero-padded stamp
    padded_shape: tuple[int, int]


def build_kernel(grid: GridSpec, sigma1: float, sigma2: float) -> KernelOp:
    """Sample the product-Gaussian kernel and plan its FFT application.

    K(z) = (2*pi)^(-1) * (sigma1*sigma2)^(-1)
           * exp(-z1^2/(2*sigma1^2) - z2^2/(2*sigma2^2))
    """
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValueError(f"kernel widths must be positive, got {sigma1}, {sigma2}")
    zx = np.arange(-(grid.nx - 1), grid.nx) * grid.dx
    zy = np.arange(-(grid.ny - 1), grid.ny) * grid.dy
    k1 = np.exp(-(zx**2) / (2.0 * sigma1**2)) / (sigma1 * math.sqrt(2.0 * math.pi))
    k2 = np.exp(-(zy**2) / (2.0 * sigma2**2)) / (sigma2 * math.sqrt(2.0 * math.pi))
    stamp = np.outer(k1, k2)
    padded = (sfft.next_fast_len(2 * grid.nx - 1), sfft.next_fast_len(2 * grid.ny - 1))
    stamp_hat = sfft.rfft2(stamp, s=padded)
    return KernelOp(grid, float(sigma1), float(sigma2), stamp, stamp_hat, padded)


def convolve(op: KernelOp, values: np.ndarray) -> np.ndarray:
    """Apply the kernel: out(x) = sum_y K(x-y) values(y) dx dy.

    Accepts (nx, ny) slices or any batch (..., nx, ny).  Self-adjoint by
    symmetry of the stamp; positivity-preserving since all entries are > 0.
    """
    grid = op.grid
    if values.shape[-2:] != (grid.nx, grid.ny):
        raise ValueError(f"slice shape {values.shape} does not match grid {grid.nx}x{grid.ny}")
    w = fft_workers()
    vhat = sfft.rfft2(values, s=op.padded_shape, workers=w)
    full = sfft.irfft2(vhat * op.stamp_hat, s=op.padded_shape, workers=w)
    out = full[..., grid.nx - 1 : 2 * grid.nx - 1, grid.ny - 1 : 2 * grid.ny - 1]
    return np.ascontiguousarray(out) * (grid.dx * grid.dy)


def row_mass(op: KernelOp) -> np.ndarray:
    """sum_y K(x,y) dx dy for every x: the kernel's view of the domain.

    Close to 1 well inside the domain (for widths a few cells wide),
    strictly below 1 near the boundary; never renormalized.
    """
    return convolve(op, np.ones((op.grid.nx, op.grid.ny)))
