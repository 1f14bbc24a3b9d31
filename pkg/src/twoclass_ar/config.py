"""Scenario files: YAML with ``params``, ``equilibrium``, ``sim``, ``kernel`` sections.

Example (SI units)::

    params:
      V1: 30.0      # free-flow speed [m/s]
      V2: 22.0
      gamma1: 3.0   # pressure exponent, > 1
      gamma2: 3.0
      AObar1: 0.7   # maximum area occupancy, in (0, 1)
      AObar2: 0.6
      tau1: 30.0    # adaptation time [s]
      tau2: 60.0
      a1: 8.0       # surface per vehicle [m^2]
      a2: 30.0
      W: 7.5        # road width [m]
      L: 1000.0     # segment length [m]
    equilibrium:
      rho1: 0.2     # [veh/m]
      rho2: 0.055
    sim:            # optional; defaults shown
      N: 400
      cfl: 0.9
      t_end: null   # null -> 1.5 t_F
      output_stride: 10
    kernel:         # optional; defaults shown
      N: 201
      tol: 1.0e-8
      max_iter: 200
    output_dir: out # optional

A ``results`` section (written into run manifests) is ignored on input, so a
manifest parses back to the scenario that produced it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ValidationError
from .kernel import DEFAULT_MAX_ITER, DEFAULT_TOL
from .model import ModelParams, characteristic_basis, equilibrium_from_densities
from .riemann import build_riemann_system
from .sim import Mode, SimConfig

PARAM_KEYS = [f.name for f in dataclasses.fields(ModelParams)]
SIM_KEYS = ("N", "cfl", "t_end", "output_stride")
KERNEL_KEYS = ("N", "tol", "max_iter")
TOP_KEYS = ("params", "equilibrium", "sim", "kernel", "output_dir", "results")


class ScenarioParseError(ValidationError):
    """Malformed scenario text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class KernelConfig:
    N: int = 201
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.N < 3:
            raise ValidationError(f"kernel.N must be at least 3, got {self.N}")
        if not self.tol > 0:
            raise ValidationError(f"kernel.tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValidationError("kernel.max_iter must be at least 1")


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    rho1s: float
    rho2s: float
    sim: SimConfig = field(default_factory=SimConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    output_dir: Path = Path("out")

    def refined(self, k: int) -> "Scenario":
        """``k`` doublings of both the simulation and the kernel grid."""
        if k < 0:
            raise ValidationError("refinement level must be non-negative")
        sim = dataclasses.replace(self.sim, N=self.sim.N * 2**k)
        kern = dataclasses.replace(self.kernel, N=(self.kernel.N - 1) * 2**k + 1)
        return dataclasses.replace(self, sim=sim, kernel=kern)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(getattr(self.params, k)) for k in PARAM_KEYS},
            "equilibrium": {"rho1": float(self.rho1s), "rho2": float(self.rho2s)},
            "sim": {
                "N": int(self.sim.N),
                "cfl": float(self.sim.cfl),
                "t_end": None if self.sim.t_end is None else float(self.sim.t_end),
                "output_stride": int(self.sim.output_stride),
            },
            "kernel": {"N": int(self.kernel.N), "tol": float(self.kernel.tol), "max_iter": int(self.kernel.max_iter)},
            "output_dir": str(self.output_dir),
        }


def _section(data: dict, name: str, keys, required: bool) -> dict:
    sec = data.get(name)
    if sec is None:
        if required:
            raise ValidationError(f"missing required section '{name}'")
        return {}
    if not isinstance(sec, dict):
        raise ValidationError(f"section '{name}' must be a mapping")
    unknown = sorted(set(sec) - set(keys))
    if unknown:
        raise ValidationError(f"unknown key(s) in '{name}': {', '.join(map(str, unknown))}")
    return sec


def _number(sec: dict, key: str, where: str, kind=float):
    value = sec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ValidationError(f"{where}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def scenario_from_dict(data: dict, check_regime: bool = True) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping with sections " + ", ".join(TOP_KEYS[:4]))
    unknown = sorted(set(data) - set(TOP_KEYS))
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(map(str, unknown))}")

    psec = _section(data, "params", PARAM_KEYS, True)
    missing = [k for k in PARAM_KEYS if k not in psec]
    if missing:
        raise ValidationError(f"params is missing: {', '.join(missing)}")
    params = ModelParams(**{k: _number(psec, k, "params") for k in PARAM_KEYS})

    esec = _section(data, "equilibrium", ("rho1", "rho2"), True)
    for k in ("rho1", "rho2"):
        if k not in esec:
            raise ValidationError(f"equilibrium is missing: {k}")
    rho1s, rho2s = _number(esec, "rho1", "equilibrium"), _number(esec, "rho2", "equilibrium")

    ssec = _section(data, "sim", SIM_KEYS, False)
    skw = {}
    for k, kind in (("N", int), ("cfl", float), ("output_stride", int)):
        if k in ssec:
            skw[k] = _number(ssec, k, "sim", kind)
    if ssec.get("t_end") is not None:
        skw["t_end"] = _number(ssec, "t_end", "sim")
    sim = SimConfig(**skw)

    ksec = _section(data, "kernel", KERNEL_KEYS, False)
    kkw = {}
    for k, kind in (("N", int), ("tol", float), ("max_iter", int)):
        if k in ksec:
            kkw[k] = _number(ksec, k, "kernel", kind)
    kern = KernelConfig(**kkw)

    out = data.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ValidationError("output_dir must be a non-empty string")

    scenario = Scenario(params, rho1s, rho2s, sim, kern, Path(out))
    if check_regime:
        eq = equilibrium_from_densities(rho1s, rho2s, params)
        build_riemann_system(eq, characteristic_basis(eq))
    return scenario


def parse_scenario(text: str, check_regime: bool = True) -> Scenario:
    """Parse and validate scenario text.

    Raises :class:`ScenarioParseError` (with line number) for malformed YAML and
    :class:`ValidationError` subclasses for violated invariants; with
    ``check_regime`` the equilibrium must also be congested.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioParseError(problem, None if mark is None else mark.line + 1) from exc
    return scenario_from_dict(data, check_regime)


def load_scenario(path, check_regime: bool = True) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return parse_scenario(text, check_regime)


def dump_scenario(s: Scenario, results: dict | None = None) -> str:
    data = s.to_dict()
    if results is not None:
        data["results"] = results
    return yaml.safe_dump(data, sort_keys=False)


__all__ = [
    "KernelConfig",
    "Mode",
    "Scenario",
    "ScenarioParseError",
    "dump_scenario",
    "load_scenario",
    "parse_scenario",
    "scenario_from_dict",
]
