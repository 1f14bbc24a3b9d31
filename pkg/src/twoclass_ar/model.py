"""Two-class Aw-Rascle traffic model: closures, equilibria and linearization.

State ordering throughout the package is ``z = (rho1, v1, rho2, v2)``; the
linearized dynamics read ``Jt z_t + Jx z_x + J z = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InfeasibleEquilibriumError,
    OrderingError,
    ValidationError,
)

# eigenvalues closer than this (relative to max |lambda|) count as repeated
DEGENERACY_RTOL = 1e-9
# equilibria must keep AO below this fraction of min(AObar_i)
FEASIBILITY_MARGIN = 0.99


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of both vehicle classes and the road segment (SI units)."""

    V1: float
    V2: float
    gamma1: float
    gamma2: float
    AObar1: float
    AObar2: float
    tau1: float
    tau2: float
    a1: float
    a2: float
    W: float
    L: float

    def __post_init__(self):
        for name in ("V1", "V2", "tau1", "tau2", "a1", "a2", "W", "L"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be positive, got {value!r}")
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 1:
                raise ValidationError(f"gamma must exceed 1 ({name} = {value!r})")
        for name in ("AObar1", "AObar2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValidationError(f"{name} must lie in (0, 1), got {value!r}")

    def V(self, i: int) -> float:
        return (self.V1, self.V2)[_class_index(i)]

    def gamma(self, i: int) -> float:
        return (self.gamma1, self.gamma2)[_class_index(i)]

    def AObar(self, i: int) -> float:
        return (self.AObar1, self.AObar2)[_class_index(i)]

    def tau(self, i: int) -> float:
        return (self.tau1, self.tau2)[_class_index(i)]

    def a(self, i: int) -> float:
        return (self.a1, self.a2)[_class_index(i)]


def _class_index(i: int) -> int:
    if i not in (1, 2):
        raise ValueError(f"class index must be 1 or 2, got {i!r}")
    return i - 1


def area_occupancy(rho1, rho2, p: ModelParams):
    """Fraction of the road surface covered by both classes."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if np.any(rho1 < 0) or np.any(rho2 < 0):
        raise DomainError("densities must be non-negative")
    out = (p.a1 * rho1 + p.a2 * rho2) / p.W
    return out if out.ndim else float(out)


def pressure(AO, i: int, p: ModelParams):
    """Traffic pressure ``V_i (AO / AObar_i)^gamma_i`` of class ``i``."""
    AO = np.asarray(AO, dtype=float)
    if np.any(AO < 0):
        raise DomainError("area occupancy must be non-negative")
    out = p.V(i) * (AO / p.AObar(i)) ** p.gamma(i)
    return out if out.ndim else float(out)


def equilibrium_speed(AO, i: int, p: ModelParams):
    """Desired speed of class ``i``; equals ``V_i - pressure``."""
    AO = np.asarray(AO, dtype=float)
    if np.any(AO < 0):
        raise DomainError("area occupancy must be non-negative")
    out = p.V(i) * (1.0 - (AO / p.AObar(i)) ** p.gamma(i))
    return out if out.ndim else float(out)


def pressure_sensitivities(rho1: float, rho2: float, p: ModelParams) -> np.ndarray:
    """``beta[i-1, j-1] = d p_i / d rho_j`` by the chain rule through AO."""
    AO = area_occupancy(rho1, rho2, p)
    beta = np.empty((2, 2))
    for i in (1, 2):
        if AO == 0:
            # d/dAO (AO^gamma) vanishes at 0 for gamma > 1
            dp_dAO = 0.0
        else:
            dp_dAO = p.V(i) * p.gamma(i) * (AO / p.AObar(i)) ** p.gamma(i) / AO
        for j in (1, 2):
            beta[i - 1, j - 1] = dp_dAO * p.a(j) / p.W
    return beta


@dataclass(frozen=True)
class EquilibriumState:
    rho1s: float
    rho2s: float
    v1s: float
    v2s: float
    beta: np.ndarray
    Jt: np.ndarray
    Jx: np.ndarray
    J: np.ndarray
    params: ModelParams = field(repr=False)

    @property
    def zstar(self) -> np.ndarray:
        return np.array([self.rho1s, self.v1s, self.rho2s, self.v2s])

    @property
    def flow_row(self) -> np.ndarray:
        """Row ``c`` with ``c @ z`` the linearized total flow perturbation."""
        return np.array([self.v1s, self.rho1s, self.v2s, self.rho2s])

    @property
    def convection(self) -> np.ndarray:
        """``Jt^-1 Jx``."""
        return np.linalg.solve(self.Jt, self.Jx)

    @property
    def relaxation(self) -> np.ndarray:
        """``Jt^-1 J``."""
        return np.linalg.solve(self.Jt, self.J)


def equilibrium_from_densities(
    rho1s: float, rho2s: float, p: ModelParams, require_ordering: bool = True
) -> EquilibriumState:
    """Steady state for given densities plus its linearization.

    Set ``require_ordering=False`` to admit equilibria with ``v1* <= v2*``
    (e.g. identical classes); the controller cannot be built for those.
    """
    if not (rho1s > 0 and rho2s > 0):
        raise InfeasibleEquilibriumError(
            f"equilibrium densities must be positive, got ({rho1s!r}, {rho2s!r})"
        )
    AO = area_occupancy(rho1s, rho2s, p)
    AOmax = FEASIBILITY_MARGIN * min(p.AObar1, p.AObar2)
    if AO > AOmax:
        raise InfeasibleEquilibriumError(
            f"area occupancy {AO:.6g} exceeds feasibility bound {AOmax:.6g}"
        )
    v1s = equilibrium_speed(AO, 1, p)
    v2s = equilibrium_speed(AO, 2, p)
    if v1s <= 0 or v2s <= 0:
        raise InfeasibleEquilibriumError(
            f"steady speeds must be positive, got v1*={v1s:.6g}, v2*={v2s:.6g}"
        )
    if require_ordering and not v1s > v2s:
        raise OrderingError(
            f"class 1 must be faster: v1*={v1s:.6g} <= v2*={v2s:.6g}"
        )

    beta = pressure_sensitivities(rho1s, rho2s, p)
    b11, b12 = beta[0]
    b21, b22 = beta[1]
    Jt = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [b11, 1.0, b12, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [b21, 0.0, b22, 1.0],
        ]
    )
    Jx = np.array(
        [
            [v1s, rho1s, 0.0, 0.0],
            [v1s * b11, v1s, v1s * b12, 0.0],
            [0.0, 0.0, v2s, rho2s],
            [v2s * b21, 0.0, v2s * b22, v2s],
        ]
    )
    t1, t2 = 1.0 / p.tau1, 1.0 / p.tau2
    J = np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [t1 * b11, t1, t1 * b12, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [t2 * b21, 0.0, t2 * b22, t2],
        ]
    )
    for m in (beta, Jt, Jx, J):
        m.setflags(write=False)
    return EquilibriumState(rho1s, rho2s, v1s, v2s, beta, Jt, Jx, J, p)


class Regime(enum.Enum):
    FREE_FLOW = "FreeFlow"
    CONGESTED = "Congested"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class CharacteristicBasis:
    """Eigenstructure of ``Jt^-1 Jx``.

    ``lam`` is ``(v1*, v2*, lambda3, lambda4)`` and column ``k`` of ``Theta`` is
    the eigenvector of ``lam[k]``. ``Theta`` and ``Jhat`` are ``None`` for a
    degenerate basis.
    """

    lam: np.ndarray
    Delta: float
    Theta: np.ndarray | None
    Jhat: np.ndarray | None
    regime: Regime

    @property
    def congested(self) -> bool:
        return self.regime is Regime.CONGESTED


def characteristic_speeds(eq: EquilibriumState) -> tuple[np.ndarray, float]:
    """Closed-form characteristic speeds and the discriminant ``Delta``."""
    r1, r2, v1, v2 = eq.rho1s, eq.rho2s, eq.v1s, eq.v2s
    b11, b22 = eq.beta[0, 0], eq.beta[1, 1]
    radicand = (b22 * r2 - b11 * r1 + v1 - v2) ** 2 + 4 * b11 * b22 * r1 * r2
    assert radicand >= 0, radicand
    Delta = float(np.sqrt(radicand))
    mid = v1 + v2 - b11 * r1 - b22 * r2
    lam = np.array([v1, v2, 0.5 * (mid + Delta), 0.5 * (mid - Delta)])
    return lam, Delta


def classify(lam) -> Regime:
    lam = np.asarray(lam, dtype=float)
    scale = np.max(np.abs(lam))
    gaps = np.abs(lam[:, None] - lam[None, :])[np.triu_indices(4, 1)]
    if scale == 0 or np.any(gaps <= DEGENERACY_RTOL * scale):
        return Regime.DEGENERATE
    if np.any(np.abs(lam) <= DEGENERACY_RTOL * scale):
        return Regime.DEGENERATE
    if np.all(lam[:3] > 0) and lam[3] < 0:
        return Regime.CONGESTED
    if np.all(lam > 0):
        return Regime.FREE_FLOW
    return Regime.DEGENERATE


def normalize_columns(Theta: np.ndarray) -> np.ndarray:
    """Unit Euclidean norm, largest-magnitude entry positive."""
    Theta = Theta / np.linalg.norm(Theta, axis=0)
    idx = np.argmax(np.abs(Theta), axis=0)
    signs = np.sign(Theta[idx, np.arange(Theta.shape[1])])
    return Theta * signs


def characteristic_basis(eq: EquilibriumState) -> CharacteristicBasis:
    lam, Delta = characteristic_speeds(eq)
    regime = classify(lam)
    if regime is Regime.DEGENERATE:
        return CharacteristicBasis(lam, Delta, None, None, regime)

    A = eq.convection
    evals, evecs = np.linalg.eig(A)
    if np.max(np.abs(evals.imag)) > 1e-9 * np.max(np.abs(evals)):
        raise ValidationError("convection matrix has complex eigenvalues")
    evals, evecs = evals.real, evecs.real
    # pair each closed-form speed with the nearest numerical eigenvalue
    order = [int(np.argmin(np.abs(evals - l))) for l in lam]
    if len(set(order)) != 4:
        return CharacteristicBasis(lam, Delta, None, None, Regime.DEGENERATE)
    Theta = normalize_columns(evecs[:, order])
    return with_theta(CharacteristicBasis(lam, Delta, Theta, None, regime), eq, Theta)


def with_theta(
    cb: CharacteristicBasis, eq: EquilibriumState, Theta: np.ndarray
) -> CharacteristicBasis:
    """Same basis with a different eigenvector matrix (and matching ``Jhat``)."""
    Theta = np.array(Theta, dtype=float)
    Jhat = -np.linalg.solve(Theta, eq.relaxation @ Theta)
    Theta.setflags(write=False)
    Jhat.setflags(write=False)
    return CharacteristicBasis(cb.lam, cb.Delta, Theta, Jhat, cb.regime)


def rescale_basis(
    cb: CharacteristicBasis, eq: EquilibriumState, factors
) -> CharacteristicBasis:
    """Scale the columns of ``Theta`` by arbitrary nonzero ``factors``."""
    factors = np.asarray(factors, dtype=float)
    if factors.shape != (4,) or np.any(factors == 0):
        raise ValueError("need four nonzero column factors")
    return with_theta(cb, eq, cb.Theta * factors)
