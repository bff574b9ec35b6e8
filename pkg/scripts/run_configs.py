"""Run the pipeline on one or more configuration files and print each report.

    python3 scripts/run_configs.py configs/*.cfg --stages bounds
"""

import argparse
import sys
import time

from specgap.config import load_config
from specgap.pipeline import STAGES, render, run_pipeline


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("configs", nargs="+")
    parser.add_argument("--stages", nargs="+", choices=STAGES, default=list(STAGES))
    parser.add_argument("--format", choices=("text", "csv", "plotdata"), default="text")
    args = parser.parse_args(argv)
    for path in args.configs:
        start = time.perf_counter()
        report = run_pipeline(load_config(path), tuple(args.stages))
        print(f"== {path} ({time.perf_counter() - start:.1f} s)")
        print(render(report, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
