"""Figure rendering for epidemic velocity-control run outputs."""

from .figures import FigureSpec, panel_annotation, render_curves, render_snapshots
from .io import (
    MassTable,
    RunDataError,
    read_manifest,
    read_masses,
    read_snapshot,
    snapshot_indices,
)

__version__ = "0.1.0"
