"""Command line entry point.

    specgap estimate CONFIG     full pipeline
    specgap bounds CONFIG       bounds only (no oracle)
    specgap oracle CONFIG       oracle only
    specgap check CONFIG        ordering checks between bounds and oracle

Exit status: 0 for a completed run (whatever the verdict), 1 for a
configuration error, 2 for a numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .config import ConfigError, load_config
from .expr import EvaluationError, ParseError
from .pipeline import emit_report, run_pipeline
from .profile import ProblemError
from .quad import IntegrationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_STAGES = {
    "estimate": ("bounds", "oracle", "check"),
    "bounds": ("bounds",),
    "oracle": ("oracle",),
    "check": ("bounds", "oracle", "check"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specgap", description="Spectral gap bounds with an eigenvalue oracle.")
    parser.add_argument("--version", action="version", version=f"specgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("estimate", "run bounds, oracle and ordering checks"),
        ("bounds", "evaluate bounds and criteria only"),
        ("oracle", "run the finite-volume oracle only"),
        ("check", "report the ordering checks only"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the run configuration")
        p.add_argument("--format", choices=("text", "csv", "plotdata"), default=None,
                       help="output format (default: the config's, else text)")
        p.add_argument("--out", default=None, help="directory for output files (default: stdout)")
        p.add_argument("--tol", type=float, default=None, help="relative quadrature tolerance")
        p.add_argument("--seed", type=int, default=None, help="reserved; the pipeline is deterministic")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError("--tol must be positive")
            config = replace(config, quadrature=replace(config.quadrature, rel_tol=args.tol))
    except (ConfigError, ParseError) as exc:
        print(f"specgap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = args.format or config.output.format
    out = args.out if args.out is not None else config.output.out
    try:
        report = run_pipeline(config, _STAGES[args.command])
        if args.command == "check":
            text = "".join(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}\n" for c in report.checks)
            print(text, end="")
            if out is not None:
                emit_report(report, fmt, out)
        else:
            emit_report(report, fmt, out)
    except (ProblemError, ConfigError) as exc:
        print(f"specgap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, EvaluationError, FloatingPointError, ArithmeticError) as exc:
        print(f"specgap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"specgap: cannot write output: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
