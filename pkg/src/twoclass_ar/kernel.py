"""Backstepping kernels on the triangle ``0 <= xi <= x <= L``.

Unknowns are the row ``K(x, xi) = (k11, k12, k13)`` and the scalar
``L11(x, xi)``. They satisfy

    lambda4 K_x + K_xi Lambda+ + K Sigma++(xi) + L11 Sigma-+(xi) = 0
    K(x, x) Lambda+ + Lambda- K(x, x) + Sigma-+(x) = 0
    L11(x, xi) = -(1/lambda4) K(x - xi, 0) Lambda+ Q0bar
                 + int_0^{-xi/lambda4} K(lambda4 nu + x, lambda4 nu + xi) Sigma+-(lambda4 nu + xi) dnu

Each ``k1j`` is constant up to the source along lines of direction
``(lambda4, lambda_j)``, which run from any node into the diagonal. The
solver integrates the source along these lines with the trapezoid rule,
taking one step per grid line crossed, and iterates on the nonlocal terms.

Fields live on ``N x N`` arrays indexed ``[x_index, xi_index]``; entries above
the diagonal are NaN.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, GridError, RegimeError
from .riemann import RiemannSystem

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class TriangularGrid:
    N: int
    L: float

    def __post_init__(self):
        if self.N < 3:
            raise GridError(f"kernel grid needs at least 3 nodes per edge, got {self.N}")
        if not self.L > 0:
            raise GridError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.L / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N)

    def lower_mask(self) -> np.ndarray:
        return np.tril(np.ones((self.N, self.N), dtype=bool))

    def refined(self) -> "TriangularGrid":
        return TriangularGrid(2 * self.N - 1, self.L)


@dataclass(frozen=True)
class KernelSolution:
    grid: TriangularGrid
    K: np.ndarray  # (N, N, 3)
    L11: np.ndarray  # (N, N)
    iterations: int
    residual: float
    history: tuple = field(default=(), repr=False)

    def boundary_row(self) -> tuple[np.ndarray, np.ndarray]:
        """``K(L, xi)`` (N, 3) and ``L11(L, xi)`` (N,) on the grid's xi nodes."""
        return self.K[-1], self.L11[-1]

    def evaluate(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear interpolation at points of the triangle."""
        Kx = np.stack([_tri_interp(self.K[..., j], self.grid, x, xi) for j in range(3)], -1)
        return Kx, _tri_interp(self.L11, self.grid, x, xi)

    def sample(self, x_nodes) -> tuple[np.ndarray, np.ndarray]:
        """Kernels on the triangle spanned by ``x_nodes``; NaN above the diagonal."""
        x_nodes = np.asarray(x_nodes, dtype=float)
        X, XI = np.meshgrid(x_nodes, x_nodes, indexing="ij")
        mask = XI <= X
        K = np.full(X.shape + (3,), np.nan)
        L = np.full(X.shape, np.nan)
        Kv, Lv = self.evaluate(X[mask], XI[mask])
        K[mask] = Kv
        L[mask] = Lv
        return K, L

    def to_csv(self, path) -> None:
        x = self.grid.x
        with open(Path(path), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["x", "xi", "k11", "k12", "k13", "L11"])
            for a in range(self.grid.N):
                for b in range(a + 1):
                    k = self.K[a, b]
                    out.writerow(
                        [repr(float(v)) for v in (x[a], x[b], k[0], k[1], k[2], self.L11[a, b])]
                    )


def _tri_interp(F: np.ndarray, grid: TriangularGrid, x, xi) -> np.ndarray:
    """Linear interpolation on cells split along lines parallel to the diagonal.

    Only nodes with ``xi <= x`` are touched for query points inside the triangle.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    N, h = grid.N, grid.h
    fa = np.clip(x / h, 0.0, N - 1)
    fb = np.clip(xi / h, 0.0, N - 1)
    fb = np.minimum(fb, fa)
    a = np.minimum(np.floor(fa).astype(int), N - 2)
    b = np.minimum(np.floor(fb).astype(int), N - 2)
    u = fa - a
    v = fb - b
    lower = v <= u
    b1 = np.minimum(b + 1, N - 1)
    f00 = F[a, b]
    f10 = F[a + 1, b]
    f11 = F[a + 1, b1]
    # upper-triangle cells never touch the diagonal cell's missing corner
    f01 = np.where(lower, 0.0, F[a, np.where(lower, b, b1)])
    lo = f00 + u * (f10 - f00) + v * (f11 - f10)
    up = f00 + v * (f01 - f00) + u * (f11 - f01)
    return np.where(lower, lo, up)


@dataclass
class _Stencil:
    """Trapezoid quadrature along the characteristics of one kernel component."""

    node: np.ndarray  # flat target node per quadrature point
    i0: np.ndarray
    i1: np.ndarray
    frac: np.ndarray
    xi: np.ndarray  # xi coordinate of the point (for Sigma evaluation)
    weight: np.ndarray
    # per off-diagonal node
    targets: np.ndarray
    xstar: np.ndarray  # x = xi where the characteristic meets the diagonal
    end_weight: np.ndarray
    first_step: np.ndarray


def _characteristics(grid: TriangularGrid, lj: float, m4: float, first_only=False) -> _Stencil:
    """Quadrature points from every off-diagonal node towards the diagonal.

    Points are placed where the line crosses grid lines: lines of constant xi
    when ``lj >= m4`` (interpolate in x), of constant x otherwise. Every
    interpolation stencil then lies strictly closer to the diagonal than the
    node the point belongs to.
    """
    N, h = grid.N, grid.h
    a, b = np.tril_indices(N, -1)
    d = (a - b).astype(float)
    sstar = d * h / (lj + m4)
    ds = h / max(lj, m4)
    npts = np.ceil(sstar / ds - _EDGE_EPS).astype(int)
    npts = np.maximum(npts, 1)
    targets = a * N + b
    xstar = (a * h) - m4 * sstar
    last = (npts - 1) * ds
    end_weight = 0.5 * (sstar - last)
    first_step = np.where(npts > 1, ds, sstar)

    if first_only:
        counts = np.minimum(npts, 2)
    else:
        counts = npts
    owner = np.repeat(np.arange(a.size), counts)
    starts = np.cumsum(counts) - counts
    k = np.arange(owner.size) - starts[owner]
    if first_only:
        # keep only k == 1 points (nodes whose first step hits the diagonal get none)
        keep = k == 1
        owner, k = owner[keep], k[keep]

    ao = a[owner].astype(float)
    bo = b[owner].astype(float)
    s = k * ds
    fx = ao - m4 * s / h
    fxi = bo + lj * s / h
    if lj >= m4:
        # xi lies on a grid line, interpolate in x
        col = np.rint(fxi).astype(int)
        m = np.floor(fx + _EDGE_EPS).astype(int)
        frac = np.clip(fx - m, 0.0, 1.0)
        m = np.minimum(m, N - 1)
        i0 = m * N + col
        i1 = np.where(m + 1 <= N - 1, i0 + N, i0)
    else:
        row = np.rint(fx).astype(int)
        n = np.floor(fxi + _EDGE_EPS).astype(int)
        frac = np.clip(fxi - n, 0.0, 1.0)
        i0 = row * N + n
        i1 = np.where(n + 1 <= row, i0 + 1, i0)
    frac = np.where(i1 == i0, 0.0, frac)

    n_owner = npts[owner]
    weight = np.full(owner.size, ds)
    weight[k == 0] = 0.5 * ds
    lastpt = k == n_owner - 1
    weight[lastpt] = 0.5 * ds + end_weight[owner[lastpt]]
    single = n_owner == 1
    weight[single] = end_weight[owner[single]]

    return _Stencil(
        node=targets[owner],
        i0=i0,
        i1=i1,
        frac=frac,
        xi=fxi * h,
        weight=weight,
        targets=targets,
        xstar=xstar,
        end_weight=end_weight,
        first_step=first_step,
    )


def diagonal_values(rs: RiemannSystem, x) -> np.ndarray:
    """``k1j(x, x) = -Sigma-+_j(x) / (lambda_j + Lambda-)``, shape ``x.shape + (3,)``."""
    return -rs.SigmaMP(x) / (rs.LambdaPlus + rs.LambdaMinus)


def l11_from_k(K: np.ndarray, rs: RiemannSystem, grid: TriangularGrid) -> np.ndarray:
    """``L11`` from ``K`` by the trace term plus trapezoid along ``x - xi = const``."""
    N, h = grid.N, grid.h
    m4 = rs.LambdaMinus
    xs = grid.x
    trace = K[:, 0, :] @ (rs.LambdaPlus * rs.Q0bar)  # index d = x - xi
    G = np.einsum("abj,bj->ab", np.nan_to_num(K), rs.SigmaPM(xs))
    D, C = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    valid = D + C < N
    H = np.where(valid, G[np.minimum(D + C, N - 1), C], 0.0)
    cum = np.cumsum(H, axis=1)
    trap = h * (cum - 0.5 * (H[:, :1] + H))
    trap[:, 0] = 0.0
    a, b = np.tril_indices(N)
    L = np.full((N, N), np.nan)
    L[a, b] = (trace[a - b] + trap[a - b, b]) / m4
    return L


def _diag_interp(values: np.ndarray, grid: TriangularGrid, x) -> np.ndarray:
    return np.interp(np.asarray(x) / grid.h, np.arange(grid.N), values)


def solve_kernels(
    rs: RiemannSystem,
    grid: TriangularGrid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> KernelSolution:
    """Successive approximation of the kernel equations.

    The trace ``K(x - xi, 0)`` and the integral in ``L11`` are taken from the
    previous iterate. Raises :class:`ConvergenceError` after ``max_iter``
    sweeps without the sup-norm update dropping below ``tol``.
    """
    lam_p = np.asarray(rs.LambdaPlus, dtype=float)
    m4 = rs.LambdaMinus
    if not (m4 > 0 and np.all(lam_p > 0)):
        raise RegimeError("kernel equations need lambda4 < 0 < Lambda+")
    if abs(grid.L - rs.L) > 1e-9 * rs.L:
        raise GridError(f"kernel grid length {grid.L} differs from system length {rs.L}")

    N = grid.N
    xs = grid.x
    stencils = [_characteristics(grid, lam_p[j], m4) for j in range(3)]

    # diagonal: data, and L11 from the diagonal data alone
    K = np.full((N, N, 3), np.nan)
    K[np.arange(N), np.arange(N)] = diagonal_values(rs, xs)

    # fixed part of every characteristic integral: diagonal value plus the end
    # point of the trapezoid (K there is the diagonal data)
    const = []
    coef = []
    for j, st in enumerate(stencils):
        gstar = diagonal_values(rs, st.xstar)
        const.append(gstar[:, j])
        S_pp = rs.SigmaPP(st.xi)[:, :, j]  # (npts, 3) rows i -> column j
        S_mp = rs.SigmaMP(st.xi)[:, j]
        coef.append((st.weight[:, None] * S_pp, st.weight * S_mp))
        K.reshape(N * N, 3)[st.targets, j] = gstar[:, j]  # K^0: constant along lines

    Ldiag = np.diag(l11_from_k(K, rs, grid)).copy()
    for j, st in enumerate(stencils):
        gstar = diagonal_values(rs, st.xstar)
        Fend = np.einsum("ni,ni->n", gstar, rs.SigmaPP(st.xstar)[:, :, j])
        Fend = Fend + _diag_interp(Ldiag, grid, st.xstar) * rs.SigmaMP(st.xstar)[:, j]
        const[j] = const[j] + st.end_weight * Fend

    history = []
    Kflat = K.reshape(N * N, 3)
    for it in range(1, max_iter + 1):
        L = l11_from_k(K, rs, grid)
        Lflat = L.reshape(N * N)
        Knew = K.copy()
        Knew_flat = Knew.reshape(N * N, 3)
        for j, st in enumerate(stencils):
            f, g = st.frac, 1.0 - st.frac
            kp = g[:, None] * Kflat[st.i0] + f[:, None] * Kflat[st.i1]
            lp = g * Lflat[st.i0] + f * Lflat[st.i1]
            cS, cL = coef[j]
            contrib = np.einsum("ni,ni->n", cS, kp) + cL * lp
            integral = np.bincount(st.node, weights=contrib, minlength=N * N)
            Knew_flat[st.targets, j] = const[j] + integral[st.targets]
        delta = float(np.nanmax(np.abs(Knew - K)))
        history.append(delta)
        K, Kflat = Knew, Knew_flat
        log.debug("kernel sweep %d: sup-norm update %.3e", it, delta)
        if delta < tol:
            L = l11_from_k(K, rs, grid)
            K.setflags(write=False)
            L.setflags(write=False)
            return KernelSolution(grid, K, L, it, delta, tuple(history))
    raise ConvergenceError(
        f"kernel iteration did not converge in {max_iter} sweeps "
        f"(last update {history[-1]:.3e} > tol {tol:.1e})",
        residual=history[-1],
    )


def kernel_residual(ks: KernelSolution, rs: RiemannSystem, grid: TriangularGrid | None = None) -> float:
    """Discrete sup-norm residual of the kernel equations.

    The transport equation is checked with a one-sided difference over the
    first characteristic step from every off-diagonal node and a trapezoid
    average of the source. ``L11`` is recomputed from ``K`` and compared with
    the stored field; the diagonal condition is checked at the nodes.
    """
    grid = ks.grid if grid is None else grid
    N, xs = grid.N, grid.x
    K, Ls = ks.K, ks.L11
    m4 = rs.LambdaMinus
    lam_p = np.asarray(rs.LambdaPlus, dtype=float)
    Lr = l11_from_k(np.asarray(K), rs, grid)
    res = [float(np.nanmax(np.abs(Lr - Ls)))]

    Kd = K[np.arange(N), np.arange(N)]
    diag = Kd * lam_p + m4 * Kd + rs.SigmaMP(xs)
    res.append(float(np.max(np.abs(diag))))

    Kflat = K.reshape(N * N, 3)
    Lflat = Lr.reshape(N * N)
    Ldiag = np.diag(Lr)
    a, b = np.tril_indices(N, -1)
    for j in range(3):
        st = _characteristics(grid, lam_p[j], m4, first_only=True)
        # second point: interpolated grid value, or the diagonal when the first step lands there
        k1 = np.empty((st.targets.size, 3))
        l1 = np.empty(st.targets.size)
        xi1 = np.empty(st.targets.size)
        has = np.zeros(st.targets.size, dtype=bool)
        pos = np.searchsorted(st.targets, st.node)
        has[pos] = True
        f = st.frac[:, None]
        k1[pos] = (1 - f) * Kflat[st.i0] + f * Kflat[st.i1]
        l1[pos] = (1 - st.frac) * Lflat[st.i0] + st.frac * Lflat[st.i1]
        xi1[pos] = st.xi
        nd = ~has
        xd = st.xstar[nd]
        k1[nd] = np.stack([_diag_interp(Kd[:, i], grid, xd) for i in range(3)], -1)
        l1[nd] = _diag_interp(Ldiag, grid, xd)
        xi1[nd] = xd

        k0 = Kflat[st.targets]
        l0 = Lflat[st.targets]
        xi0 = xs[b]
        F0 = np.einsum("ni,ni->n", k0, rs.SigmaPP(xi0)[:, :, j]) + l0 * rs.SigmaMP(xi0)[:, j]
        F1 = np.einsum("ni,ni->n", k1, rs.SigmaPP(xi1)[:, :, j]) + l1 * rs.SigmaMP(xi1)[:, j]
        r = (k1[:, j] - k0[:, j]) / st.first_step + 0.5 * (F0 + F1)
        res.append(float(np.max(np.abs(r))) if r.size else 0.0)
    return max(res)
