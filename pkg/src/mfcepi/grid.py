"""Space-time grid, discrete differential operators, and quadrature.

The domain is the unit square [0,1]^2 with time horizon T=1.  Space is
cell-centered (x_k = (k+0.5)*dx), time is node-centered (t_n = n*dt with
dt = 1/(nt-1)).  Scalar fields are arrays indexed (t, x, y); spatial
operators accept any leading batch axes.

The gradient uses forward differences with a zero ghost difference at the
high boundary; the divergence is defined as its exact negative adjoint
(backward differences whose closure encodes zero wall fluxes).  This makes
discrete integration by parts hold to machine precision and the composed
Laplacian symmetric with Neumann (zero-flux) behavior.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np

SNAPSHOT_MAGIC = "MFCEPI1"


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """Regular rectangular mesh on [0,1]^2 x [0,1]."""

    nx: int
    ny: int
    nt: int

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"need nx, ny >= 4, got {self.nx}x{self.ny}")
        if self.nt < 2:
            raise ValueError(f"need nt >= 2, got nt={self.nt}")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def dt(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.nx, self.ny)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X, Y) of cell centers, each of shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt


def _check_spatial(u: np.ndarray, grid: GridSpec) -> None:
    if u.shape[-2:] != (grid.nx, grid.ny):
        raise ValueError(f"field shape {u.shape} does not end in ({grid.nx}, {grid.ny})")


def grad(u: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference gradient of u(..., x, y).

    The difference at the last cell in each direction is zero: the ghost
    value beyond the wall equals the boundary value, i.e. zero normal
    derivative.
    """
    _check_spatial(u, grid)
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[..., :-1, :] = (u[..., 1:, :] - u[..., :-1, :]) / grid.dx
    gy[..., :, :-1] = (u[..., :, 1:] - u[..., :, :-1]) / grid.dy
    return gx, gy


def div(mx: np.ndarray, my: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Discrete divergence, the exact negative adjoint of :func:`grad`.

    The component mx[..., k, :] acts as the flux through the right edge of
    cell k; wall fluxes are structurally zero, so the spatial sum of the
    divergence vanishes identically (discrete divergence theorem).  The
    last entry along each direction is a dead degree of freedom.
    """
    _check_spatial(mx, grid)
    if mx.shape != my.shape:
        raise ValueError(f"component shapes differ: {mx.shape} vs {my.shape}")
    out = np.empty_like(mx)
    out[..., 0, :] = mx[..., 0, :]
    out[..., 1:-1, :] = mx[..., 1:-1, :] - mx[..., :-2, :]
    out[..., -1, :] = -mx[..., -2, :]
    out /= grid.dx
    tmp = np.empty_like(my)
    tmp[..., :, 0] = my[..., :, 0]
    tmp[..., :, 1:-1] = my[..., :, 1:-1] - my[..., :, :-2]
    tmp[..., :, -1] = -my[..., :, -2]
    out += tmp / grid.dy
    return out


def laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """div(grad(u)): 5-point stencil with Neumann closure, symmetric NSD."""
    gx, gy = grad(u, grid)
    return div(gx, gy, grid)


def dt_forward(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Forward time difference on axis -3; last slice replicates the
    previous difference (display/update convenience only — the transport
    constraint uses the nt-1 leading rows)."""
    if u.shape[-3] != grid.nt:
        raise ValueError(f"expected {grid.nt} time slices, got {u.shape[-3]}")
    if grid.nt < 2:
        raise ValueError("dt_forward needs nt >= 2")
    out = np.empty_like(u)
    out[..., :-1, :, :] = (u[..., 1:, :, :] - u[..., :-1, :, :]) / grid.dt
    out[..., -1, :, :] = out[..., -2, :, :]
    return out


def integrate_space(u: np.ndarray, grid: GridSpec) -> np.ndarray | float:
    """Midpoint quadrature over the spatial cells: sum(u) * dx * dy.

    With leading axes, returns an array of per-slice integrals.
    """
    _check_spatial(u, grid)
    return np.sum(u, axis=(-2, -1)) * (grid.dx * grid.dy)


def time_weights(grid: GridSpec) -> np.ndarray:
    """Trapezoid weights in time: dt * [1/2, 1, ..., 1, 1/2]."""
    w = np.full(grid.nt, grid.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate_spacetime(u: np.ndarray, grid: GridSpec) -> float:
    """Space-time integral: midpoint in space, trapezoid in time."""
    per_slice = integrate_space(u, grid)
    return float(np.sum(time_weights(grid) * per_slice, axis=-1))


def write_field(path: str | os.PathLike, values: np.ndarray) -> None:
    """Write a field snapshot: raw little-endian float64, row-major
    (t, x, y), with a sidecar text header '<path>.hdr'."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3:
        raise ValueError(f"expected a (t, x, y) array, got shape {values.shape}")
    nt, nx, ny = values.shape
    path = os.fspath(path)
    with open(path, "wb") as f:
        f.write(values.tobytes())
    with open(path + ".hdr", "w") as f:
        f.write(f"{SNAPSHOT_MAGIC} {nx} {ny} {nt}\n")


def read_field(path: str | os.PathLike) -> np.ndarray:
    """Read a field snapshot written by :func:`write_field`; returns the
    (nt, nx, ny) array."""
    path = os.fspath(path)
    with open(path + ".hdr") as f:
        header = f.readline().split()
    if len(header) != 4 or header[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}.hdr: not a {SNAPSHOT_MAGIC} header: {header}")
    nx, ny, nt = (int(tok) for tok in header[1:])
    data = np.fromfile(path, dtype="<f8")
    if data.size != nt * nx * ny:
        raise ValueError(
            f"{path}: expected {nt * nx * ny} values for {nx}x{ny}x{nt}, found {data.size}"
        )
    return data.reshape(nt, nx, ny)
