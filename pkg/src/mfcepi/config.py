"""Run configuration: defaults, key=value config files, CLI merging, manifest.

A RunConfig holds every resolved parameter of a run.  The same key=value
syntax is used for input config files and for the run manifest written
next to the outputs, so a manifest re-parses to exactly the config that
produced it.
"""

from __future__ import annotations

import dataclasses
import math
import os

from .presets import PRESET_NAMES, make_preset


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    experiment: str = ""
    mode: str = "control"
    nx: int = 128
    ny: int = 128
    nt: int = 32
    beta: float = 0.7
    gamma: float = 0.1
    sigma1: float = 0.02
    sigma2: float = 0.02
    c: float = 0.01
    eta_s: float = 0.01
    eta_i: float = 0.01
    eta_r: float = 0.01
    alpha_s: float = 1.0
    alpha_i: float = 10.0
    alpha_r: float = 1.0
    tau_s: float = 0.1
    tau_i: float = 0.1
    tau_r: float = 0.1
    sigma_dual_s: float = 0.1
    sigma_dual_i: float = 0.1
    sigma_dual_r: float = 0.1
    tol: float = 1e-6
    max_iter: int = 50_000
    preconditioner: str = "paper"
    log_every: int = 50
    out_dir: str = "run_out"
    snapshots: tuple[int, ...] = ()
    save_phi: bool = False
    terminal: str = "quadratic"
    initial_s: str = ""
    initial_i: str = ""
    initial_r: str = ""
    potential: str = ""


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_snapshots(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


_PARSERS = {
    "experiment": str, "mode": str, "preconditioner": str, "terminal": str,
    "out_dir": str, "initial_s": str, "initial_i": str, "initial_r": str,
    "potential": str,
    "nx": int, "ny": int, "nt": int, "max_iter": int, "log_every": int,
    "beta": float, "gamma": float, "sigma1": float, "sigma2": float, "c": float,
    "eta_s": float, "eta_i": float, "eta_r": float,
    "alpha_s": float, "alpha_i": float, "alpha_r": float,
    "tau_s": float, "tau_i": float, "tau_r": float,
    "sigma_dual_s": float, "sigma_dual_i": float, "sigma_dual_r": float,
    "tol": float,
    "snapshots": _parse_snapshots, "save_phi": _parse_bool,
}

KNOWN_KEYS = tuple(_PARSERS)


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Read 'key = value' lines; '#' starts a comment.  Unknown keys and
    malformed lines are reported with their line number."""
    values: dict[str, str] = {}
    path = os.fspath(path)
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def default_snapshot_indices(nt: int) -> tuple[int, ...]:
    """Time indices for the standard density snapshots at
    t = 0, 0.21, 0.47, 0.74 and 1."""
    dt = 1.0 / (nt - 1)
    idx = [0] + [math.ceil(t / dt) for t in (0.21, 0.47, 0.74)] + [nt - 1]
    return tuple(dict.fromkeys(min(i, nt - 1) for i in idx))


def resolve_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Merge defaults <- experiment preset <- config file <- overrides.

    Values arrive as strings and are converted per key; conversion errors
    name the offending key.  The experiment preset supplies beta, gamma
    and the terminal-cost kind unless explicitly overridden.
    """
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in (*file_values, *overrides):
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}")

    merged = {**file_values, **overrides}
    resolved: dict[str, object] = {}
    for key, text in merged.items():
        try:
            resolved[key] = _PARSERS[key](text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"key {key!r}: cannot parse {text!r}: {exc}") from None

    experiment = resolved.get("experiment", "")
    explicit = [resolved.get(k, "") for k in ("initial_s", "initial_i", "initial_r")]
    if experiment:
        if experiment not in PRESET_NAMES:
            raise ConfigError(
                f"unknown experiment {experiment!r}; choose one of {', '.join(PRESET_NAMES)}"
            )
        if any(explicit):
            raise ConfigError("give either an experiment preset or explicit initial densities")
        preset = make_preset(experiment)
        resolved.setdefault("beta", preset.beta)
        resolved.setdefault("gamma", preset.gamma)
        resolved.setdefault("terminal", preset.terminal_kind)
    elif not all(explicit):
        raise ConfigError(
            "no experiment preset: explicit initial_s, initial_i and initial_r are required"
        )

    config = RunConfig(**resolved)
    if config.mode not in ("control", "no_control"):
        raise ConfigError(f"mode must be control or no_control, got {config.mode!r}")
    if config.terminal not in ("quadratic", "quadratic_plus_potential"):
        raise ConfigError(f"unknown terminal cost {config.terminal!r}")
    if min(config.nx, config.ny) < 4 or config.nt < 2:
        raise ConfigError(f"grid too small: {config.nx}x{config.ny}x{config.nt}")
    if not config.snapshots:
        config = dataclasses.replace(config, snapshots=default_snapshot_indices(config.nt))
    if any(n < 0 or n >= config.nt for n in config.snapshots):
        raise ConfigError(f"snapshot indices {config.snapshots} outside 0..{config.nt - 1}")
    return config


def to_manifest(config: RunConfig) -> str:
    """Render every resolved parameter as key = value lines."""
    lines = []
    for field in dataclasses.fields(config):
        value = getattr(config, field.name)
        if field.name == "snapshots":
            value = ",".join(str(i) for i in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"


def parse_config(
    config_path: str | os.PathLike | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Resolve a config file (optional) plus override values to a RunConfig."""
    file_values = read_config_file(config_path) if config_path else None
    return resolve_config(file_values, overrides)
