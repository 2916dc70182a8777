"""``spdec`` command line.

Settings come from flags and optionally from a JSON config file given
with ``--config``; keys are flag names (``batch-fraction`` or
``batch_fraction``). Flags win over the file.

Exit codes: 10 satisfying assignment found and verified, 20 gave up,
1 usage or I/O error, 0 data commands that completed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import COMMANDS, EXIT_ERROR, Mode, RunSpec
from .instance import ParseError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    """``4.1,4.15,4.2`` or ``start:stop:step`` (stop included)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        out, k = [], 0
        while start + k * step <= stop + 1e-9 * step:
            out.append(round(start + k * step, 10))
            k += 1
        return out
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _int_list(text: str) -> list:
    """``1,2,3`` or ``1-5`` (inclusive)."""
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(x) for x in text.split("-"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default settings (flags override it)")
    common.add_argument("--n", type=int, default=10_000, help="number of variables")
    common.add_argument("--alpha", type=float, default=4.2, help="clause density M/N")
    common.add_argument("--alpha-grid", type=_float_list, default=None, help="list a,b,c or start:stop:step")
    common.add_argument("--k", type=int, default=3, help="clause size")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--seeds", type=_int_list, default=None, help="list 1,2,3 or range 1-5 (overrides --seed)")
    common.add_argument("--select", choices=["certitude", "polarization"], default="certitude")
    common.add_argument("--batch-fraction", type=float, default=1e-3,
                        help="fraction of the original variables fixed per step")
    common.add_argument("--tol", type=float, default=1e-3, help="SP convergence tolerance")
    common.add_argument("--max-sweeps", type=int, default=1000)
    common.add_argument("--damping", type=float, default=0.0)
    common.add_argument("--out", default=None, help="output file (directory for per-run trace files)")
    common.add_argument("--dimacs", default=None, help="read the instance from a DIMACS CNF file")
    common.add_argument("--deterministic", action="store_true", default=True,
                        help="byte-identical output for identical settings (always on)")
    common.add_argument("--initial-only", action="store_true", default=False,
                        help="alpha-scan: stop after the initial SP solve")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="spdec", description="Survey propagation with certitude-driven decimation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for mode, text in [(Mode.SOLVE, "solve one instance; exit 10 if solved, 20 if not"),
                       (Mode.TRACE, "complexity density along decimation"),
                       (Mode.ALPHA_SCAN, "initial and final complexity density over an alpha grid"),
                       (Mode.DELTA_CORR, "predicted vs measured complexity drop, one variable per step"),
                       (Mode.CRITICAL, "where decimation stops and how many clauses remain")]:
        sub.add_parser(mode.value, parents=[common], help=text, description=text)
    return parser


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = _load_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        # re-parse with the file as defaults so explicit flags still win
        for key in ("alpha_grid", "seeds"):
            if isinstance(cfg.get(key), str):
                cfg[key] = (_float_list if key == "alpha_grid" else _int_list)(cfg[key])
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    seeds = args.seeds if args.seeds else [args.seed]
    return RunSpec(mode=Mode(args.command), n=args.n, alpha=args.alpha, alpha_grid=tuple(args.alpha_grid or ()),
                   k=args.k, seeds=tuple(seeds), selection=args.select, batch_fraction=args.batch_fraction,
                   tol=args.tol, max_sweeps=args.max_sweeps, damping=args.damping, out=args.out,
                   dimacs=args.dimacs, deterministic=args.deterministic, initial_only=args.initial_only)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = spec_from_args(args)
        return COMMANDS[spec.mode](spec)
    except (OSError, ParseError, ValueError) as exc:
        print(f"spdec: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
