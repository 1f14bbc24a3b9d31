"""Sup- and L2-norm histories of the open and closed loops, written as CSV."""

import argparse
import csv
from pathlib import Path

import numpy as np

from twoclass_ar.config import load_scenario
from twoclass_ar.pipeline import build_pipeline

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "benchmark.yaml"))
    ap.add_argument("--out", default=str(ROOT / "out" / "open_vs_closed.csv"))
    args = ap.parse_args()
    pl = build_pipeline(load_scenario(args.scenario))
    o, c = pl.simulate("open"), pl.simulate("closed")
    t = np.union1d(o.t, c.t)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "sup_open", "sup_closed", "l2_open", "l2_closed"])
        for ti in t:
            w.writerow([repr(float(ti))] + [repr(float(np.interp(ti, r.t, v)))
                       for v, r in ((o.supnorm, o), (c.supnorm, c), (o.l2norm, o), (c.l2norm, c))])
    lo, lc = o.value_at(o.l2norm, pl.tF), c.value_at(c.l2norm, pl.tF)
    print(f"t_F = {pl.tF:.4f} s, L2 closed/open at t_F = {lc / lo:.3e}; wrote {out}")


if __name__ == "__main__":
    main()
