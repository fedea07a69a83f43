"""Readers for solver run directories.

A run directory contains masses.csv (per-node group masses), density
snapshots named rho_<G>_t<NNNN>.f64 in the raw field format (little-endian
float64 with a text sidecar header 'MFCEPI1 nx ny nt'), and a key = value
run manifest.  Everything here reads those files only; there is no
dependency on the solver package.
"""

from __future__ import annotations

import dataclasses
import os
import re

import numpy as np

SNAPSHOT_MAGIC = "MFCEPI1"
GROUPS = ("S", "I", "R")
_SNAPSHOT_RE = re.compile(r"rho_([SIR])_t(\d{4})\.f64$")


class RunDataError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class MassTable:
    times: np.ndarray         # (nt,)
    masses: dict[str, np.ndarray]  # group -> (nt,)

    @property
    def nt(self) -> int:
        return len(self.times)


def read_masses(run_dir: str | os.PathLike) -> MassTable:
    path = os.path.join(os.fspath(run_dir), "masses.csv")
    try:
        with open(path) as f:
            lines = [line.strip() for line in f if line.strip()]
    except OSError as exc:
        raise RunDataError(f"cannot read {path}: {exc}") from None
    if not lines or lines[0] != "t,S,I,R":
        raise RunDataError(f"{path}: expected header 't,S,I,R'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise RunDataError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        try:
            rows.append([float(tok) for tok in parts])
        except ValueError:
            raise RunDataError(f"{path}:{lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise RunDataError(f"{path}: fewer than two time rows")
    data = np.asarray(rows)
    return MassTable(data[:, 0], {g: data[:, 1 + k] for k, g in enumerate(GROUPS)})


def read_snapshot(run_dir: str | os.PathLike, group: str, index: int) -> np.ndarray:
    """One (nx, ny) density slice; raises if the file is missing or malformed."""
    path = os.path.join(os.fspath(run_dir), f"rho_{group}_t{index:04d}.f64")
    header_path = path + ".hdr"
    if not os.path.exists(path) or not os.path.exists(header_path):
        raise RunDataError(f"missing snapshot {path}")
    with open(header_path) as f:
        header = f.readline().split()
    if len(header) != 4 or header[0] != SNAPSHOT_MAGIC:
        raise RunDataError(f"{header_path}: not a {SNAPSHOT_MAGIC} header")
    nx, ny, nt = (int(tok) for tok in header[1:])
    data = np.fromfile(path, dtype="<f8")
    if data.size != nx * ny * nt:
        raise RunDataError(f"{path}: size {data.size} does not match header")
    return data.reshape(nt, nx, ny)[0]


def snapshot_indices(run_dir: str | os.PathLike) -> list[int]:
    """Sorted time indices for which all three group snapshots exist."""
    by_index: dict[int, set[str]] = {}
    for name in os.listdir(run_dir):
        match = _SNAPSHOT_RE.match(name)
        if match:
            by_index.setdefault(int(match.group(2)), set()).add(match.group(1))
    indices = sorted(idx for idx, groups in by_index.items() if groups == set(GROUPS))
    if not indices:
        raise RunDataError(f"no complete snapshot sets found in {run_dir}")
    return indices


def read_manifest(run_dir: str | os.PathLike) -> dict[str, str]:
    path = os.path.join(os.fspath(run_dir), "run_manifest.txt")
    values: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line and "=" in line:
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    return values
