"""Command-line entry point.

    ucplab VERB [--config PATH|STOCK] [--out DIR] [--jobs N] [--seed S]
                [--set key=value ...] [--format json|csv|both] [--plot]

Exit status: 0 when every check passes or is advisory, 1 on a failed check,
2 on configuration or solver errors.  Stdout carries only the summary table.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, _kernels
from .config import load_config, stock_names
from .errors import UcpError
from .io import atomic_write, write_eigensolution

VERBS = {
    "validate-geometry": "geometry",
    "verify-thm1": "thm1",
    "fit-exponent": "fit",
    "verify-projector": "thm2",
    "verify-residual": "thm3",
    "verify-weyl": "thm4",
    "eigen": "eigen",
    "info": None,
}

DEFAULT_CONFIG = {
    "geometry": "geometry", "thm1": "box1d", "fit": "fit_exponent_1d", "thm2": "thm2_projector_1d",
    "thm3": "thm3_residual_1d", "thm4": "thm4_weyl_1d", "eigen": "box1d",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucplab", description=__doc__.split("\n\n")[0])
    parser.add_argument("verb", choices=sorted(VERBS))
    parser.add_argument("--config", help="config file (TOML or JSON) or stock config name")
    parser.add_argument("--out", default="ucplab-out", help="output directory")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads for sweep cases")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--format", choices=("json", "csv", "both"), default="both")
    parser.add_argument("--plot", action="store_true", help="also write plot.svg")
    return parser


def _info():
    print(f"ucplab {__version__}")
    print(f"kernel backend: {_kernels.BACKEND}")
    print("stock configs: " + ", ".join(stock_names()))
    return 0


def _eigen(cfg, out):
    from .experiments import _eigen as solve, setup
    grid, H = setup(cfg)
    sol = solve(cfg, H)
    write_eigensolution(out, grid, sol)
    print("eigen: pass")
    for i, (e, r) in enumerate(zip(sol.energies, sol.residuals)):
        print(f"  E[{i}] = {e:.12g}  residual {r:.3e}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    theorem = VERBS[args.verb]
    if theorem is None:
        return _info()
    from .experiments import run
    try:
        cfg = load_config(args.config or DEFAULT_CONFIG[theorem], args.overrides, args.seed)
        cfg["theorem"] = theorem
        if args.jobs is not None:
            cfg["jobs"] = args.jobs
        out = Path(args.out)
        if theorem == "eigen":
            return _eigen(cfg, out)
        report = run(cfg)
    except UcpError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    formats = ("json", "csv") if args.format == "both" else (args.format,)
    report.write(out, formats, plot=args.plot)
    atomic_write(out / "environment.json", json.dumps({"backend": _kernels.BACKEND,
                                                        "version": __version__}) + "\n")
    print(report.summary_table())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
