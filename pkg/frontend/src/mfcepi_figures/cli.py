"""render snapshots|curves: turn run directories into figures."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render_curves, render_snapshots
from .io import RunDataError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="render", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    snap = sub.add_parser("snapshots", help="compartment-by-time density panels")
    snap.add_argument("--run", required=True, help="run directory")
    snap.add_argument("--out", required=True, help="output image path")
    snap.add_argument("--times", help="comma-separated snapshot indices")
    snap.add_argument(
        "--color-policy", choices=("shared", "per-panel"), default="shared"
    )

    curves = sub.add_parser("curves", help="with/without-control mass curves")
    curves.add_argument("--run", required=True, help="controlled run directory")
    curves.add_argument("--baseline", required=True, help="uncontrolled run directory")
    curves.add_argument("--out", required=True, help="output image path")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "snapshots":
            times = (
                tuple(int(tok) for tok in args.times.split(",")) if args.times else None
            )
            spec = FigureSpec(
                run_dir=args.run, out_path=args.out,
                color_policy=args.color_policy, times=times,
            )
            print(render_snapshots(spec))
        else:
            print(render_curves(args.run, args.baseline, args.out))
    except (RunDataError, OSError, ValueError) as exc:
        print(f"render: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
