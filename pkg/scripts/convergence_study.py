"""Grid refinement of the kernel residual and of the closed-loop decay."""

import argparse
import dataclasses
from pathlib import Path

from twoclass_ar.cli import convergence_tolerance
from twoclass_ar.config import load_scenario
from twoclass_ar.kernel import TriangularGrid, kernel_residual, solve_kernels
from twoclass_ar.pipeline import build_pipeline

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "benchmark.yaml"))
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    s = load_scenario(args.scenario)
    pl = build_pipeline(s)
    rs = pl.rs

    print("kernel N   residual    ratio")
    prev = None
    for k in range(args.levels):
        N = 25 * 2**k + 1
        r = kernel_residual(solve_kernels(rs, TriangularGrid(N, rs.L)), rs)
        print(f"{N:8d}   {r:.3e}   {'' if prev is None else f'{r / prev:.2f}'}")
        prev = r

    print(f"\nt_F = {pl.tF:.4f} s\nsim N   sup(1.05 t_F)/sup(0)   tolerance")
    for k in range(args.levels):
        N = 200 * 2**k
        sk = dataclasses.replace(s, sim=dataclasses.replace(s.sim, N=N, t_end=1.05 * pl.tF, output_stride=10**9))
        res = build_pipeline(sk).simulate("closed")
        tol = convergence_tolerance(rs.L / N, rs.L)
        print(f"{N:5d}   {res.supnorm[-1] / res.supnorm[0]:.3e}              {tol:.4g}")


if __name__ == "__main__":
    main()
