"""Command line entry point: ``pxflame solve|sweep|verify|oracle``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import VERIFY_CHECKS, ConfigError, bundled_scenarios, resolve
from .grid import fmt
from .oracle import oracle_reaction_integral, profile_quadrature
from .reaction import ReactionProfile, lambda_star
from .runner import EXIT_CONFIG, EXIT_OK, run_scenario


def _checks(text: str) -> set[str]:
    names = {t.strip() for t in text.split(",") if t.strip()}
    bad = names - set(VERIFY_CHECKS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown checks: {', '.join(sorted(bad))}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pxflame", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("solve", "solve the scenario down to its final eps and write the solution"),
        ("sweep", "run the eps sweep and write the convergence table and plots"),
        ("verify", "run the sweep plus the enabled verification checks"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True,
                       help=f"JSON file or bundled name ({', '.join(bundled_scenarios())})")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        if name == "verify":
            p.add_argument("--only", type=_checks, default=None,
                           help=f"comma separated subset of {','.join(VERIFY_CHECKS)}")

    o = sub.add_parser("oracle", help="tabulate the 1D travelling-front profile")
    o.add_argument("--p", type=float, required=True, help="constant exponent")
    o.add_argument("--mass", type=float, default=0.5)
    o.add_argument("--eps", type=float, required=True)
    o.add_argument("--rows", type=int, default=200, help="number of table rows")
    o.add_argument("--out", type=Path, default=None, help="CSV path (stdout if omitted)")
    return parser


def _oracle(args) -> int:
    prof = profile_quadrature(ReactionProfile.quadratic(args.mass), args.p, args.eps)
    idx = np.unique(np.linspace(0, prof.u.size - 1, args.rows).round().astype(int))
    lines = ["distance,u,slope"]
    lines += [f"{fmt(prof.x[k])},{fmt(prof.u[k])},{fmt(prof.slope(prof.u[k]))}" for k in idx]
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    print(f"lambda_star={fmt(lambda_star(args.p, args.mass))} "
          f"reaction_integral={fmt(oracle_reaction_integral(prof))} width={fmt(prof.width)}",
          file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "oracle":
            return _oracle(args)
        cfg = resolve(args.config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run_scenario(cfg, args.out, args.command, getattr(args, "only", None))
    out = args.out or cfg.output or f"out/{cfg.name}"
    print(f"{args.command} {cfg.name}: status {status}, outputs in {out}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
