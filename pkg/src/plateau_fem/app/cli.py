"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .sweep import run_sweep

FLAGS = (
    ("--shape", str, "sphere, donut, croissant, peanut or custom"),
    ("--beta", str, "comma-separated line weights"),
    ("--phi", str, "field angle(s) phi in radians; 'pi/2' is accepted"),
    ("--psi", str, "field angle(s) psi in radians"),
    ("--iters", str, "ADMM iterations per point"),
    ("--gamma-m", str, "step size of the identity constraint"),
    ("--gamma-c", str, "step size of the curl constraint"),
    ("--alpha", str, "over-relaxation factor in [1, 2)"),
    ("--subdiv", str, "box subdivisions NX,NY,NZ"),
    ("--box", str, "half-width of the box mesh"),
    ("--msh", str, "Gmsh mesh file instead of the box mesh"),
    ("--out", str, "output directory"),
    ("--log-every", str, "progress line every N iterations (0: off)"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateau-fem", description="Minimize the line/surface energy around a particle for a sweep of beta and field directions.")
    parser.add_argument("--config", help="flat key = value file; flags override its entries")
    for flag, kind, text in FLAGS:
        parser.add_argument(flag, type=kind, help=text)
    parser.add_argument("--no-vtk", action="store_true", default=None, help="skip the per-point VTK files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    try:
        config = parse_config(args.config, overrides)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        rows = run_sweep(config)
    except (ValueError, OSError) as err:  # bad mesh or shape, unreadable files
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 1 if any(r.diverged for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
