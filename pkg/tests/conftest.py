from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from twoclass_ar.config import load_scenario
from twoclass_ar.kernel import TriangularGrid, solve_kernels
from twoclass_ar.model import ModelParams, characteristic_basis, equilibrium_from_densities
from twoclass_ar.riemann import RiemannSystem, build_riemann_system

ROOT = Path(__file__).resolve().parents[1]
BENCHMARK = ROOT / "scenarios" / "benchmark.yaml"

BENCH_PARAMS = dict(
    V1=30.0, V2=22.0, gamma1=3.0, gamma2=3.0, AObar1=0.7, AObar2=0.6,
    tau1=30.0, tau2=60.0, a1=8.0, a2=30.0, W=7.5, L=1000.0,
)
BENCH_RHO = (0.2, 0.055)


def synthetic_system(
    speeds=(3.0, 5.0, 8.0, -4.0),
    L=1.0,
    seed=0,
    decoupled=False,
    scale=1.0,
    Q0bar=None,
    rates=None,
) -> RiemannSystem:
    """Dense made-up Riemann system (not from any traffic equilibrium).

    The benchmark's couplings are sparse, so kernel tests that need every
    term active run on these. ``decoupled`` zeroes Sigma+- and Q0bar.
    """
    rng = np.random.default_rng(seed)
    Jw = scale * rng.uniform(-1.0, 1.0, (4, 4))
    rates = rng.uniform(-0.5, 0.5, 4) if rates is None else np.asarray(rates, dtype=float)
    if Q0bar is None:
        Q0bar = rng.uniform(-1.0, 1.0, 3)
    if decoupled:
        Jw[:3, 3] = 0.0
        Q0bar = np.zeros(3)
    return RiemannSystem(
        L=L,
        perm=np.array([1, 2, 0, 3]),
        speeds=np.asarray(speeds, dtype=float),
        Theta=np.eye(4),
        Jhat=Jw,
        rates=rates,
        Jw=Jw,
        flow_row=np.ones(4),
        Q0bar=np.asarray(Q0bar, dtype=float),
        R1bar=rng.uniform(-1.0, 1.0, 3),
        kappa=1.0,
    )


@pytest.fixture(scope="session")
def params():
    return ModelParams(**BENCH_PARAMS)


@pytest.fixture(scope="session")
def eq(params):
    return equilibrium_from_densities(*BENCH_RHO, params)


@pytest.fixture(scope="session")
def cb(eq):
    return characteristic_basis(eq)


@pytest.fixture(scope="session")
def rs(eq, cb):
    return build_riemann_system(eq, cb)


@pytest.fixture(scope="session")
def kernels(rs):
    return solve_kernels(rs, TriangularGrid(201, rs.L))


@pytest.fixture(scope="session")
def kernels_coarse(rs):
    return solve_kernels(rs, TriangularGrid(51, rs.L))


@pytest.fixture(scope="session")
def scenario():
    return load_scenario(BENCHMARK)


@pytest.fixture(scope="session")
def gains(rs, kernels):
    from twoclass_ar.controller import build_gains
    from twoclass_ar.sim import grid_nodes

    return build_gains(rs, kernels, grid_nodes(rs.L, 400))


@pytest.fixture(scope="session")
def closed_run(eq, rs, gains, kernels):
    from twoclass_ar.sim import Mode, SimConfig, run

    return run(SimConfig(N=400, mode=Mode.CLOSED_LOOP, record_beta=True), eq, rs, gains, kernels)


@pytest.fixture(scope="session")
def open_run(eq, rs):
    from twoclass_ar.sim import Mode, SimConfig, run

    return run(SimConfig(N=400, mode=Mode.OPEN_LOOP), eq, rs)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
