"""Ordering of every bound against the discrete gap on half-line problems.

Each problem is g'' + V' g' with unit diffusion.  A row passes when the
largest lower bound and the smallest finite upper bound bracket the oracle
value up to 3%.
"""

import argparse
import math
import sys

from specgap.config import parse_config
from specgap.pipeline import ORDER_SLACK, run_pipeline

PROBLEMS = [
    ("-r", 60),
    ("-2*r", 40),
    ("-3*r", 30),
    ("-r^2", 12),
    ("-0.5*r^2", 15),
    ("-r^2-r", 12),
    ("-2*r+log(1+r)", 50),
    ("-r+0.5*log(1+r)", 80),
    ("-3*r+2*log(1+r)", 40),
    ("-2*r-log(1+r)", 400),
    ("-r^2+log(1+r)", 12),
    ("-0.5*r^2-r+log(1+r)", 14),
]

TEMPLATE = """
[problem]
kind = half_line
a = "1"
V = "{V}"
R_max = {R}

[oracle]
n = {n}
doubling_check = false
"""


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", type=int, nargs="*", help="indices of problems to run")
    args = parser.parse_args(argv)
    chosen = PROBLEMS if not args.only else [PROBLEMS[i] for i in args.only]
    failures = 0
    print(f"{'V':<24} {'max lower':>12} {'oracle':>12} {'min upper':>12}  best lower")
    for V, R in chosen:
        report = run_pipeline(parse_config(TEMPLATE.format(V=V, R=R, n=max(4000, 20 * R))))
        lam1 = report.oracle["lambda1"]
        lowers = [b for b in report.bounds if b.direction == "lower"]
        best = max(lowers, key=lambda b: b.value)
        finite = [b.value for b in report.bounds if b.direction == "upper" and math.isfinite(b.value)]
        upper = min(finite) if finite else math.inf
        ok = best.value <= lam1 * (1 + ORDER_SLACK) and lam1 <= upper * (1 + ORDER_SLACK)
        failures += not ok
        print(f"{V:<24} {best.value:12.7g} {lam1:12.7g} {upper:12.7g}  {best.method}"
              f"{'' if ok else '   ORDER VIOLATED'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
