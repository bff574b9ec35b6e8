"""Grid refinement and truncation study for the finite-volume oracle.

Prints the discrete gap for n, 2n, 4n, ... cells, the observed convergence
order from successive differences, and the drift when R_max doubles.
"""

import argparse
import math
import sys

from specgap.oracle import discretize, lambda1_discrete, truncation_drift
from specgap.profile import HalfLine, Problem, constant, family, radialize


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--c", type=float, default=2.0, help="drift strength")
    parser.add_argument("--R", type=float, default=30.0, help="truncation radius")
    parser.add_argument("--n", type=int, default=250, help="coarsest grid")
    parser.add_argument("--levels", type=int, default=6)
    args = parser.parse_args(argv)
    coeffs = radialize(Problem(HalfLine(constant(1.0), family("linear", c1=-args.c)), 0.0, args.R))
    ns = [args.n * 2**k for k in range(args.levels)]
    lams = [lambda1_discrete(discretize(coeffs, args.R, n)) for n in ns]
    print(f"exact gap c^2/4 = {args.c ** 2 / 4:.10g}")
    print(f"{'n':>8} {'lambda1':>16} {'ratio':>8} {'order':>6}")
    for k, (n, lam) in enumerate(zip(ns, lams)):
        line = f"{n:8d} {lam:16.12f}"
        if k >= 2:
            ratio = (lams[k - 2] - lams[k - 1]) / (lams[k - 1] - lam)
            line += f" {ratio:8.4f} {math.log2(abs(ratio)):6.3f}"
        print(line)
    drift = truncation_drift(coeffs, n=ns[-1] // 4)
    print(f"R_max doubling drift: {drift['drift']:.3g} ({'ok' if drift['ok'] else 'too large'})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
