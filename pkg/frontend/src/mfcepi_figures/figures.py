"""Figure builders: snapshot panels and with/without-control mass curves.

Rendering is a pure function of the run directories: the same inputs
produce pixel-identical images.
"""

from __future__ import annotations

import dataclasses

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import GROUPS, MassTable, RunDataError, read_masses, read_snapshot, snapshot_indices

GROUP_LABELS = {"S": "susceptible", "I": "infected", "R": "recovered"}


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    run_dir: str
    baseline_dir: str | None = None
    compartments: tuple[str, ...] = GROUPS
    color_policy: str = "shared"  # shared per compartment row, or per-panel
    out_path: str = "figure.png"
    times: tuple[int, ...] | None = None  # snapshot indices; default: all found

    def __post_init__(self):
        if self.color_policy not in ("shared", "per-panel"):
            raise ValueError(f"unknown color policy {self.color_policy!r}")
        unknown = set(self.compartments) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown compartments {sorted(unknown)}")


def panel_annotation(masses: MassTable, group: str, index: int) -> str:
    """Subtitle for one panel: the time and the group's total mass, read
    straight from masses.csv."""
    return f"t={masses.times[index]:.2f}  sum={masses.masses[group][index]:.3f}"


def render_snapshots(spec: FigureSpec) -> str:
    """Panel grid (rows = compartments, columns = snapshot times) with the
    per-panel mass annotation; returns the written path."""
    indices = list(spec.times) if spec.times is not None else snapshot_indices(spec.run_dir)
    masses = read_masses(spec.run_dir)
    if max(indices) >= masses.nt:
        raise RunDataError(
            f"snapshot index {max(indices)} beyond masses.csv ({masses.nt} rows)"
        )
    rows = list(spec.compartments)
    fields = {
        (g, n): read_snapshot(spec.run_dir, g, n) for g in rows for n in indices
    }
    fig, axes = plt.subplots(
        len(rows), len(indices),
        figsize=(2.4 * len(indices), 2.6 * len(rows)),
        squeeze=False,
    )
    for i, g in enumerate(rows):
        if spec.color_policy == "shared":
            vmax = max(fields[(g, n)].max() for n in indices)
            vmax = vmax if vmax > 0 else 1.0
        for j, n in enumerate(indices):
            ax = axes[i][j]
            if spec.color_policy == "per-panel":
                vmax = fields[(g, n)].max() or 1.0
            ax.imshow(
                fields[(g, n)].T, origin="lower", extent=(0, 1, 0, 1),
                vmin=0.0, vmax=vmax, cmap="viridis",
            )
            ax.set_title(panel_annotation(masses, g, n), fontsize=8)
            ax.set_xticks([])
            ax.set_yticks([])
            if j == 0:
                ax.set_ylabel(GROUP_LABELS[g], fontsize=9)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=110)
    plt.close(fig)
    return spec.out_path


def render_curves(control_dir: str, baseline_dir: str, out_path: str) -> str:
    """Three sub-plots (S, I, R), each with the controlled and uncontrolled
    total-mass curves over time; returns the written path."""
    control = read_masses(control_dir)
    baseline = read_masses(baseline_dir)
    if control.nt != baseline.nt or not np.allclose(control.times, baseline.times):
        raise RunDataError(
            f"time grids differ: {control_dir} has {control.nt} rows, "
            f"{baseline_dir} has {baseline.nt}"
        )
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    for ax, g in zip(axes, GROUPS):
        ax.plot(control.times, control.masses[g], label="with control", color="C0")
        ax.plot(
            baseline.times, baseline.masses[g], label="without control",
            color="C3", linestyle="--",
        )
        ax.set_title(GROUP_LABELS[g])
        ax.set_xlabel("t")
        ax.set_ylabel("total mass")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path
