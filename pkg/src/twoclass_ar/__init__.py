"""Boundary backstepping control of the linearized two-class Aw-Rascle traffic model."""

from .config import KernelConfig, Scenario, load_scenario, parse_scenario
from .controller import BacksteppingTransform, FeedbackGains, build_gains, control_input, convergence_time
from .errors import (
    ConstructionError,
    ConvergenceError,
    NumericalError,
    RegimeError,
    TwoClassARError,
    ValidationError,
)
from .kernel import KernelSolution, TriangularGrid, kernel_residual, solve_kernels
from .model import (
    CharacteristicBasis,
    EquilibriumState,
    ModelParams,
    Regime,
    area_occupancy,
    characteristic_basis,
    equilibrium_from_densities,
    equilibrium_speed,
    pressure,
)
from .pipeline import Pipeline, build_pipeline
from .riemann import RiemannSystem, build_riemann_system
from .sim import Mode, SimConfig, SimResult, initial_profiles, run

__version__ = "0.1.0"
