"""Diagonalized control-design model in Riemann coordinates.

The characteristic variables ``y = Theta^-1 z`` are permuted into the slot
order ``w = (w1, w2, w3, w4)`` with speeds ``(v2*, lambda3, v1*, lambda4)`` and
scaled by ``exp(-Jhat_kk x / lambda_k)`` so that the diagonal of the source
term vanishes. The result is

    w_t  + Lambda+ w_x = Sigma++(x) w + Sigma+-(x) w4
    w4_t - Lambda- w4_x = Sigma-+(x) w
    w(0, t)  = Q0bar w4(0, t)
    w4(L, t) = R1bar . w(L, t) + Ubar(t),   Ubar = exp(-Jhat44 L / lambda4) U / kappa
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConstructionError, RegimeError, WellPosednessError
from .model import CharacteristicBasis, EquilibriumState, Regime

KAPPA_ATOL = 1e-12


def slot_permutation(lam) -> np.ndarray:
    """Basis index feeding each w-slot: ascending positive speeds, then the negative one.

    For ``lam = (v1*, v2*, lambda3, lambda4)`` with ``lambda4 < 0 < v2* < lambda3 < v1*``
    this is ``(1, 2, 0, 3)``.
    """
    lam = np.asarray(lam, dtype=float)
    neg = np.flatnonzero(lam < 0)
    if neg.size != 1:
        raise RegimeError(
            f"need exactly one negative characteristic speed, got {lam.tolist()}"
        )
    pos = [k for k in np.argsort(lam) if lam[k] > 0]
    return np.array(pos + [int(neg[0])])


@dataclass(frozen=True)
class RiemannSystem:
    L: float
    perm: np.ndarray  # w-slot -> basis column
    speeds: np.ndarray  # (v2*, lambda3, v1*, lambda4)
    Theta: np.ndarray
    Jhat: np.ndarray
    rates: np.ndarray  # Jhat_kk / lambda_k per slot
    Jw: np.ndarray  # Jhat permuted to slot order
    flow_row: np.ndarray
    Q0bar: np.ndarray
    R1bar: np.ndarray
    kappa: float

    @property
    def LambdaPlus(self) -> np.ndarray:
        return self.speeds[:3]

    @property
    def LambdaMinus(self) -> float:
        return -float(self.speeds[3])

    @property
    def lam4(self) -> float:
        return float(self.speeds[3])

    # -- scaling and state transforms ------------------------------------

    def scale(self, x) -> np.ndarray:
        """Diagonal factors ``exp(-rate_k x)``, shape ``x.shape + (4,)``."""
        x = np.asarray(x, dtype=float)
        return np.exp(-np.multiply.outer(x, self.rates))

    def T_inv(self, x) -> np.ndarray:
        """Maps physical perturbations to Riemann coordinates, ``(..., 4, 4)``."""
        P = np.linalg.inv(self.Theta)[self.perm]
        return self.scale(x)[..., :, None] * P

    def T(self, x) -> np.ndarray:
        """Inverse of :meth:`T_inv`."""
        PT = self.Theta[:, self.perm]
        return PT / self.scale(x)[..., None, :]

    def Tu_inv(self, x) -> np.ndarray:
        return self.T_inv(x)[..., :3, :]

    def Tl_inv(self, x) -> np.ndarray:
        return self.T_inv(x)[..., 3, :]

    def to_riemann(self, z, x) -> np.ndarray:
        """``z`` of shape ``(n, 4)`` sampled at ``x`` (n,) -> ``w`` (n, 4)."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        if z.shape != x.shape + (4,):
            raise ValueError(f"state shape {z.shape} does not match grid {x.shape}")
        return np.einsum("...ij,...j->...i", self.T_inv(x), z)

    def from_riemann(self, w, x) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        x = np.asarray(x, dtype=float)
        if w.shape != x.shape + (4,):
            raise ValueError(f"state shape {w.shape} does not match grid {x.shape}")
        return np.einsum("...ij,...j->...i", self.T(x), w)

    # -- source coefficients ----------------------------------------------

    def Sigma(self, x) -> np.ndarray:
        """Full 4x4 coupling ``Jw_ij exp((rate_j - rate_i) x)`` with zero diagonal."""
        x = np.asarray(x, dtype=float)
        expo = np.exp(np.multiply.outer(x, self.rates[None, :] - self.rates[:, None]))
        S = self.Jw * expo
        S[..., np.arange(4), np.arange(4)] = 0.0
        return S

    def SigmaPP(self, x) -> np.ndarray:
        return self.Sigma(x)[..., :3, :3]

    def SigmaPM(self, x) -> np.ndarray:
        return self.Sigma(x)[..., :3, 3]

    def SigmaMP(self, x) -> np.ndarray:
        return self.Sigma(x)[..., 3, :3]

    def input_scale(self) -> float:
        """Factor ``s`` with ``Ubar = U / s``."""
        return self.kappa * float(np.exp(self.rates[3] * self.L))

    def dump_csv(self, path, x) -> None:
        """Write Sigma entries on ``x`` plus the boundary data for inspection."""
        x = np.asarray(x, dtype=float)
        S = self.Sigma(x)
        labels = [f"S{i + 1}{j + 1}" for i in range(4) for j in range(4) if i != j]
        with open(Path(path), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["# kappa", repr(self.kappa)])
            out.writerow(["# Q0bar"] + [repr(v) for v in self.Q0bar])
            out.writerow(["# R1bar"] + [repr(v) for v in self.R1bar])
            out.writerow(["x"] + labels)
            for k, xk in enumerate(x):
                row = [S[k, i, j] for i in range(4) for j in range(4) if i != j]
                out.writerow([repr(float(xk))] + [repr(float(v)) for v in row])


def boundary_matrices(
    eq: EquilibriumState, Theta: np.ndarray, perm, rates, L: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """``(Q0bar, R1bar, kappa)`` from the linearized boundary conditions.

    At ``x = 0`` the conditions ``rho1 = rho2 = 0`` and zero flow perturbation
    are solved for ``w(0)`` given ``w4(0)``. At ``x = L`` the flow condition is
    solved for ``w4(L)``.
    """
    c = eq.flow_row
    P = np.asarray(perm)
    T0 = Theta[:, P]  # scaling is the identity at x = 0
    B0 = np.vstack([np.eye(4)[0], np.eye(4)[2], c])
    M = B0 @ T0
    A0, b0 = M[:, :3], M[:, 3]
    if np.linalg.cond(A0) > 1e12:
        raise WellPosednessError(
            "inlet boundary conditions do not determine w(0) from w4(0)"
        )
    Q0bar = -np.linalg.solve(A0, b0)

    kappa = float(c @ Theta[:, P[3]])
    if abs(kappa) < KAPPA_ATOL:
        raise ConstructionError(f"kappa = {kappa:.3e} is numerically zero")
    TL = Theta[:, P] / np.exp(-np.asarray(rates) * L)
    cT = c @ TL
    R1bar = -cT[:3] / cT[3]
    return Q0bar, R1bar, kappa


def build_riemann_system(
    eq: EquilibriumState, cb: CharacteristicBasis, L: float | None = None
) -> RiemannSystem:
    if cb.regime is Regime.DEGENERATE or cb.Theta is None:
        raise ConstructionError("degenerate characteristic basis: repeated speeds")
    if cb.regime is not Regime.CONGESTED:
        raise RegimeError(
            f"equilibrium not congested: lambda4 = {cb.lam[3]:+.6g} >= 0"
        )
    if not eq.v1s > eq.v2s:
        raise RegimeError("slot ordering requires v1* > v2*")
    L = eq.params.L if L is None else float(L)
    perm = slot_permutation(cb.lam)
    speeds = cb.lam[perm]
    # w1 <-> v2*, w2 <-> lambda3, w3 <-> v1*, w4 <-> lambda4
    assert np.array_equal(perm, [1, 2, 0, 3]), perm
    Jhat = np.asarray(cb.Jhat)
    rates = np.diag(Jhat)[perm] / speeds
    Jw = Jhat[np.ix_(perm, perm)]
    Q0bar, R1bar, kappa = boundary_matrices(eq, cb.Theta, perm, rates, L)
    arrays = [perm, speeds, rates, Jw, Q0bar, R1bar]
    for a in arrays:
        a.setflags(write=False)
    return RiemannSystem(
        L=L,
        perm=perm,
        speeds=speeds,
        Theta=cb.Theta,
        Jhat=Jhat,
        rates=rates,
        Jw=Jw,
        flow_row=eq.flow_row,
        Q0bar=Q0bar,
        R1bar=R1bar,
        kappa=kappa,
    )
