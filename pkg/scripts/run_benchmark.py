"""Run the shipped benchmark in open and closed loop and print the summary."""

import argparse
import sys
from pathlib import Path

from twoclass_ar.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out" / "benchmark"))
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    argv = ["--scenario", str(ROOT / "scenarios" / "benchmark.yaml"), "--mode", "both",
            "--compare", "--dump-kernels", "--out", args.out]
    sys.exit(main(argv + (["--svg"] if args.svg else [])))
