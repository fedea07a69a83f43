"""Command-line entry point.

Exit status: 0 on success/convergence, 3 when the iteration cap was hit
before the tolerance, 2 for configuration errors, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .presets import PRESET_NAMES
from .runner import run
from .solver import SolverDivergenceError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mfcepi",
        description="Velocity-field control of a spatial SIR epidemic",
    )
    p.add_argument("--experiment", choices=PRESET_NAMES, help="built-in experiment preset")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--beta", type=float, help="infection rate")
    p.add_argument("--gamma", type=float, help="recovery rate")
    p.add_argument("--sigma", type=float, help="kernel width (both axes)")
    p.add_argument("--c", type=float, help="congestion weight")
    p.add_argument("--eta", type=float, help="diffusion coefficient (all groups)")
    p.add_argument("--alpha-s", type=float)
    p.add_argument("--alpha-i", type=float)
    p.add_argument("--alpha-r", type=float)
    p.add_argument("--tau", type=float, help="primal step size (all groups)")
    p.add_argument("--sigma-dual", type=float, help="dual step size (all groups)")
    p.add_argument("--tol", type=float, help="relative-error stopping tolerance")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--mode", choices=("control", "no_control"))
    p.add_argument("--preconditioner", choices=("paper", "corrected"))
    p.add_argument("--out-dir")
    p.add_argument("--snapshots", help="comma-separated time indices, e.g. 0,7,15")
    return p


def overrides_from_args(args: argparse.Namespace) -> dict[str, str]:
    ov: dict[str, str] = {}

    def put(key, value):
        if value is not None:
            ov[key] = str(value)

    put("experiment", args.experiment)
    put("nx", args.nx)
    put("ny", args.ny)
    put("nt", args.nt)
    put("beta", args.beta)
    put("gamma", args.gamma)
    put("c", args.c)
    put("tol", args.tol)
    put("max_iter", args.max_iter)
    put("mode", args.mode)
    put("preconditioner", args.preconditioner)
    put("out_dir", args.out_dir)
    put("snapshots", args.snapshots)
    put("alpha_s", args.alpha_s)
    put("alpha_i", args.alpha_i)
    put("alpha_r", args.alpha_r)
    if args.sigma is not None:
        ov["sigma1"] = ov["sigma2"] = str(args.sigma)
    if args.eta is not None:
        ov["eta_s"] = ov["eta_i"] = ov["eta_r"] = str(args.eta)
    if args.tau is not None:
        ov["tau_s"] = ov["tau_i"] = ov["tau_r"] = str(args.tau)
    if args.sigma_dual is not None:
        for key in ("sigma_dual_s", "sigma_dual_i", "sigma_dual_r"):
            ov[key] = str(args.sigma_dual)
    return ov


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, overrides_from_args(args))
    except (ConfigError, OSError) as exc:
        print(f"mfcepi: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except SolverDivergenceError as exc:
        print(f"mfcepi: solver diverged: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mfcepi: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
