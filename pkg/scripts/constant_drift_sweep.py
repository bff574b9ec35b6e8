"""Sweep the drift strength c for g'' - c g' on the half-line.

The exact gap is c^2/4.  For each c the script prints the best searched
lower bound, the moment upper bound and the discrete eigenvalue.

    python3 scripts/constant_drift_sweep.py --c 0.5 1 2 4 8
"""

import argparse
import csv
import sys
import time

from specgap.bounds import search_test_function, upper_eq17
from specgap.oracle import discretize, lambda1_discrete
from specgap.profile import HalfLine, Problem, constant, family, radialize
from specgap.quad import QuadratureSettings, cumulative_C


def run(c: float, n: int):
    R = 60.0 / c * max(1.0, c)
    coeffs = radialize(Problem(HalfLine(constant(1.0), family("linear", c1=-c)), 0.0, R))
    settings = QuadratureSettings(tail_horizon=R)
    start = time.perf_counter()
    C = cumulative_C(coeffs.gamma, 0.0, R, settings)
    lower = search_test_function(C, None, 0.0, theta_range=(0.01, max(4.0, c)), settings=settings)
    upper = upper_eq17(coeffs, settings)
    elapsed = time.perf_counter() - start
    oracle = lambda1_discrete(discretize(coeffs, R, n))
    return {
        "c": c,
        "exact": c * c / 4,
        "lower": lower.value,
        "theta": lower.diagnostics["theta"],
        "upper": upper.value,
        "oracle": oracle,
        "seconds": elapsed,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--c", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    parser.add_argument("--n", type=int, default=6000, help="oracle cells")
    parser.add_argument("--csv", help="also write the table here")
    args = parser.parse_args(argv)
    rows = [run(c, args.n) for c in args.c]
    print(f"{'c':>6} {'c^2/4':>10} {'lower':>12} {'theta':>8} {'upper':>10} {'oracle':>10} {'sec':>6}")
    for r in rows:
        print(f"{r['c']:6.3g} {r['exact']:10.6g} {r['lower']:12.9g} {r['theta']:8.4g} "
              f"{r['upper']:10.6g} {r['oracle']:10.6g} {r['seconds']:6.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
