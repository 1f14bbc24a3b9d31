"""model -> riemann -> kernel -> gains, bundled for one scenario."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .controller import FeedbackGains, build_gains, convergence_time
from .kernel import KernelSolution, TriangularGrid, kernel_residual, solve_kernels
from .model import CharacteristicBasis, EquilibriumState, characteristic_basis, equilibrium_from_densities
from .riemann import RiemannSystem, build_riemann_system
from .sim import Mode, SimConfig, SimResult, grid_nodes, run

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pipeline:
    scenario: Scenario
    eq: EquilibriumState
    cb: CharacteristicBasis
    rs: RiemannSystem
    kernels: KernelSolution
    gains: FeedbackGains
    kernel_residual: float

    @property
    def tF(self) -> float:
        return convergence_time(self.rs)

    @property
    def x(self) -> np.ndarray:
        return grid_nodes(self.rs.L, self.scenario.sim.N)

    def simulate(self, mode: Mode | str, **overrides) -> SimResult:
        cfg = SimConfig(**{**self.scenario.sim.__dict__, "mode": Mode(mode), **overrides})
        return run(cfg, self.eq, self.rs, self.gains, self.kernels)

    def summary(self) -> dict:
        rs = self.rs
        return {
            "lambda": [float(v) for v in self.cb.lam],
            "regime": self.cb.regime.value,
            "v1s": float(self.eq.v1s),
            "v2s": float(self.eq.v2s),
            "kappa": float(rs.kappa),
            "Q0bar": [float(v) for v in rs.Q0bar],
            "R1bar": [float(v) for v in rs.R1bar],
            "tF": float(self.tF),
            "kernel_iterations": int(self.kernels.iterations),
            "kernel_residual": float(self.kernel_residual),
        }


def build_pipeline(s: Scenario) -> Pipeline:
    eq = equilibrium_from_densities(s.rho1s, s.rho2s, s.params)
    cb = characteristic_basis(eq)
    rs = build_riemann_system(eq, cb)
    grid = TriangularGrid(s.kernel.N, rs.L)
    ks = solve_kernels(rs, grid, s.kernel.tol, s.kernel.max_iter)
    res = kernel_residual(ks, rs)
    log.info("kernels: %d sweeps, residual %.3e", ks.iterations, res)
    gains = build_gains(rs, ks, grid_nodes(rs.L, s.sim.N))
    return Pipeline(s, eq, cb, rs, ks, gains, res)
