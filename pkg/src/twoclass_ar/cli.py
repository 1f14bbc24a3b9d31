"""Command-line driver: scenario file in, CSV series and a run manifest out.

    twoclass-ar --scenario scenarios/benchmark.yaml --mode both --compare --out out/

Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import Scenario, dump_scenario, load_scenario
from .errors import NumericalError, ValidationError
from .pipeline import Pipeline, build_pipeline
from .sim import Mode, SimResult
from .svg import write_heatmap

log = logging.getLogger("twoclass_ar")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_SCENARIO = Path(__file__).resolve().parents[2] / "scenarios" / "benchmark.yaml"


def convergence_tolerance(h: float, L: float) -> float:
    """Relative sup-norm tolerance ``max(1e-3, 10 h / L)`` for 'zero in finite time'."""
    return max(1e-3, 10.0 * h / L)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_fields_csv(path, res: SimResult) -> None:
    """t-major rows ``t, x, rho1, v1, rho2, v2`` (target mode: ``t, x, beta``)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        if res.fields is None:
            out.writerow(["t", "x", "beta"])
            for t, frame in zip(res.times, res.beta_frames):
                for xk, b in zip(res.x, frame):
                    out.writerow([_fmt(t), _fmt(xk), _fmt(b)])
            return
        out.writerow(["t", "x", "rho1", "v1", "rho2", "v2"])
        for t, frame in zip(res.times, res.fields):
            for xk, row in zip(res.x, frame):
                out.writerow([_fmt(t), _fmt(xk)] + [_fmt(v) for v in row])


def write_series_csv(path, res: SimResult) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "U", "supnorm", "l2norm", "betaL"])
        for row in zip(res.t, res.U, res.supnorm, res.l2norm, res.betaL):
            out.writerow([_fmt(v) for v in row])


def run_summary(res: SimResult, pl: Pipeline) -> dict:
    x = res.x
    h = float(x[1] - x[0])
    s0 = float(res.supnorm[0])
    tol = convergence_tolerance(h, pl.rs.L)
    out = {
        "steps": int(res.t.size - 1),
        "dt": float(res.dt),
        "sup_initial": s0,
        "sup_final": float(res.supnorm[-1]),
        "sup_at_tF": res.value_at(res.supnorm, res.tF),
        "l2_at_tF": res.value_at(res.l2norm, res.tF),
        "tolerance_relative": tol,
    }
    if res.mode is Mode.CLOSED_LOOP:
        late = res.t > 0
        out["max_abs_betaL"] = float(np.max(np.abs(res.betaL[late])))
        out["sup_at_1.05tF"] = res.value_at(res.supnorm, 1.05 * res.tF)
        out["converged"] = bool(out["sup_at_1.05tF"] <= tol * s0) if res.t[-1] >= 1.05 * res.tF else None
    return out


def run_scenario(
    s: Scenario,
    modes=("closed",),
    out_dir=None,
    dump_kernels: bool = False,
    compare: bool = False,
    svg: bool = False,
    stream=None,
) -> dict:
    """Run the pipeline for each mode, write outputs, print a summary table.

    Returns the manifest ``results`` dictionary. Output layout::

        <out>/manifest.yaml
        <out>/<mode>/fields.csv, series.csv [, heatmap.svg]
        <out>/kernels.csv, riemann.csv     (dump_kernels)
    """
    stream = sys.stdout if stream is None else stream
    out = Path(out_dir if out_dir is not None else s.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pl = build_pipeline(s)
    results = pl.summary()
    runs = {}
    for mode in modes:
        m = Mode(mode)
        res = pl.simulate(m)
        runs[m.value] = res
        d = out / m.value
        d.mkdir(exist_ok=True)
        write_fields_csv(d / "fields.csv", res)
        write_series_csv(d / "series.csv", res)
        if svg:
            if res.fields is not None:
                data = (res.fields[..., 0] - pl.eq.rho1s) / pl.eq.rho1s
                write_heatmap(d / "heatmap.svg", data, res.times, res.x, f"{m.value}: rho1 perturbation / rho1*")
            else:
                write_heatmap(d / "heatmap.svg", res.beta_frames, res.times, res.x, "target: beta")
        results[m.value] = run_summary(res, pl)
    if dump_kernels:
        pl.kernels.to_csv(out / "kernels.csv")
        pl.rs.dump_csv(out / "riemann.csv", pl.kernels.grid.x)
    if compare and {"open", "closed"} <= set(runs):
        lo, lc = results["open"]["l2_at_tF"], results["closed"]["l2_at_tF"]
        results["comparison"] = {"l2_open_at_tF": lo, "l2_closed_at_tF": lc, "ratio": lc / lo if lo else float("nan")}
    (out / "manifest.yaml").write_text(dump_scenario(dataclasses.replace(s, output_dir=out), results))
    print_summary(results, stream)
    return results


def print_summary(results: dict, stream) -> None:
    lam = results["lambda"]
    w = stream.write
    w(f"regime        {results['regime']}\n")
    for k, v in enumerate(lam, 1):
        w(f"lambda{k}       {v:+.6f} m/s\n")
    w(f"kappa         {results['kappa']:+.6e}\n")
    w(f"t_F           {results['tF']:.4f} s   (L/v2* + L/(-lambda4))\n")
    w(f"kernel        {results['kernel_iterations']} sweeps, residual {results['kernel_residual']:.3e}\n")
    modes = [m for m in ("open", "closed", "target") if m in results]
    if modes:
        w(f"{'mode':8s} {'sup(0)':>11s} {'sup(t_F)':>11s} {'sup(end)':>11s} {'L2(t_F)':>11s}\n")
        for m in modes:
            r = results[m]
            w(f"{m:8s} {r['sup_initial']:11.4e} {r['sup_at_tF']:11.4e} {r['sup_final']:11.4e} {r['l2_at_tF']:11.4e}\n")
    if "comparison" in results:
        c = results["comparison"]
        w(f"closed/open L2 at t_F: {c['ratio']:.4e}  ({c['l2_closed_at_tF']:.4e} / {c['l2_open_at_tF']:.4e})\n")


def _modes(arg: str) -> tuple[str, ...]:
    return ("open", "closed") if arg == "both" else (arg,)


def _run_one(path: Path, args, out: Path, stream) -> int:
    try:
        s = load_scenario(path)
        if args.refine:
            s = s.refined(args.refine)
        run_scenario(
            s,
            _modes(args.mode),
            out,
            dump_kernels=args.dump_kernels,
            compare=args.compare,
            svg=args.svg,
            stream=stream,
        )
    except ValidationError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {path}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _worker(item):
    import io

    path, args, out = item
    buf = io.StringIO()
    code = _run_one(path, args, out, buf)
    return code, buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twoclass-ar",
        description="Backstepping outlet control of the linearized two-class traffic model.",
    )
    p.add_argument("--scenario", action="append", type=Path, help="scenario YAML (repeatable; default: shipped benchmark)")
    p.add_argument("--mode", choices=["open", "closed", "target", "both"], default="closed")
    p.add_argument("--out", type=Path, help="output directory (default: the scenario's output_dir)")
    p.add_argument("--dump-kernels", action="store_true", help="write kernels.csv and riemann.csv")
    p.add_argument("--refine", type=int, default=0, metavar="K", help="double both grids K times")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="run scenarios in N processes")
    p.add_argument("--compare", action="store_true", help="print the closed/open L2 ratio at t_F (with --mode both)")
    p.add_argument("--svg", action="store_true", help="also write an SVG heatmap per mode")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.refine < 0:
        print("error: --refine must be non-negative", file=sys.stderr)
        return EXIT_VALIDATION
    paths = args.scenario or [DEFAULT_SCENARIO]
    items = []
    for k, path in enumerate(paths):
        out = args.out
        if out is not None and len(paths) > 1:
            out = out / f"{k:02d}_{path.stem}"
        items.append((path, args, out))
    if args.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            outcomes = list(ex.map(_worker, items))
        for _, text in outcomes:
            sys.stdout.write(text)
        codes = [c for c, _ in outcomes]
    else:
        codes = [_run_one(path, a, out, sys.stdout) for path, a, out in items]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
