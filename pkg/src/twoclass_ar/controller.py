"""Full-state feedback law for the ramp-metering input at ``x = L``.

Requiring ``beta(L, t) = 0`` in the Volterra transform

    beta(x) = w4(x) - int_0^x (K(x, xi) w(xi) + L11(x, xi) w4(xi)) dxi

together with ``w4(L) = R1bar . w(L) + U / s`` (``s = kappa exp(Jhat44 L / lambda4)``)
gives, in physical perturbations ``Psi = z - z*``,

    U = -s R1bar Tu^-1(L) Psi(L) + s int_0^L (K(L, xi) Tu^-1(xi) + L11(L, xi) Tl^-1(xi)) Psi(xi) dxi
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import KernelSolution
from .model import EquilibriumState
from .riemann import RiemannSystem


def trapezoid_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def convergence_time(rs: RiemannSystem) -> float:
    """``L / v2* + L / (-lambda4)``: slowest downstream plus the upstream transit."""
    return rs.L / float(rs.speeds[0]) + rs.L / rs.LambdaMinus


@dataclass(frozen=True)
class FeedbackGains:
    x: np.ndarray  # quadrature nodes on [0, L]
    boundary_gain: np.ndarray  # (4,) acting on Psi(L)
    integral_gain: np.ndarray  # (n, 4) acting on Psi(xi)
    tF: float
    # kernel row K(L, .), L11(L, .) on the same nodes, for beta(L) diagnostics
    K_row: np.ndarray
    L_row: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.x)


def kernel_row(ks: KernelSolution, x) -> tuple[np.ndarray, np.ndarray]:
    """``K(L, xi)`` and ``L11(L, xi)`` linearly interpolated onto ``x``."""
    x = np.asarray(x, dtype=float)
    Krow, Lrow = ks.boundary_row()
    xk = ks.grid.x
    K = np.stack([np.interp(x, xk, Krow[:, j]) for j in range(3)], -1)
    return K, np.interp(x, xk, Lrow)


def build_gains(rs: RiemannSystem, ks: KernelSolution, x=None) -> FeedbackGains:
    """Precompute the physical-variable gains on the nodes ``x`` (default: kernel grid)."""
    x = ks.grid.x if x is None else np.asarray(x, dtype=float)
    if abs(x[0]) > 1e-12 * rs.L or abs(x[-1] - rs.L) > 1e-9 * rs.L:
        raise ValueError("gain nodes must span [0, L]")
    s = rs.input_scale()
    boundary = -s * rs.R1bar @ rs.Tu_inv(rs.L)
    K, Lr = kernel_row(ks, x)
    Tinv = rs.T_inv(x)
    integral = s * (np.einsum("nj,njk->nk", K, Tinv[:, :3, :]) + Lr[:, None] * Tinv[:, 3, :])
    for a in (x, boundary, integral, K, Lr):
        a.setflags(write=False)
    return FeedbackGains(x, boundary, integral, convergence_time(rs), K, Lr)


def control_input(g: FeedbackGains, state, eq: EquilibriumState) -> float:
    """Outlet flow perturbation ``U(t)`` for a physical state sampled on ``g.x``.

    ``state`` holds absolute values ``(rho1, v1, rho2, v2)`` with shape ``(n, 4)``.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (g.x.size, 4):
        raise ValueError(f"state shape {state.shape} does not match gain nodes ({g.x.size}, 4)")
    psi = state - eq.zstar
    return float(g.boundary_gain @ psi[-1] + np.sum(g.weights * np.einsum("nk,nk->n", g.integral_gain, psi)))


def beta_at_outlet(g: FeedbackGains, w) -> float:
    """``beta(L)`` from Riemann coordinates ``w`` (n, 4) on ``g.x``."""
    w = np.asarray(w, dtype=float)
    integrand = np.einsum("nj,nj->n", g.K_row, w[:, :3]) + g.L_row * w[:, 3]
    return float(w[-1, 3] - g.weights @ integrand)


class BacksteppingTransform:
    """``(alpha, beta)`` from ``w`` on fixed nodes, with trapezoid quadrature.

    The kernels are sampled once on the triangle spanned by ``x``.
    """

    def __init__(self, ks: KernelSolution, x):
        self.x = np.asarray(x, dtype=float)
        K, L = ks.sample(self.x)
        n = self.x.size
        # row i integrates over nodes 0..i with trapezoid weights
        W = np.zeros((n, n))
        for i in range(1, n):
            W[i, : i + 1] = trapezoid_weights(self.x[: i + 1])
        self._WK = np.nan_to_num(K) * W[..., None]
        self._WL = np.nan_to_num(L) * W

    def __call__(self, w) -> tuple[np.ndarray, np.ndarray]:
        w = np.asarray(w, dtype=float)
        alpha = w[:, :3].copy()
        beta = w[:, 3] - np.einsum("ikj,kj->i", self._WK, w[:, :3]) - self._WL @ w[:, 3]
        return alpha, beta

    def inverse(self, alpha, beta) -> np.ndarray:
        """Recover ``w`` from ``(alpha, beta)`` by forward substitution."""
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        rhs = beta + np.einsum("ikj,kj->i", self._WK, alpha)
        A = np.eye(self.x.size) - self._WL
        w4 = solve_triangular(A, rhs, lower=True)
        return np.column_stack([alpha, w4])
