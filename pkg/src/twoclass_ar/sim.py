"""Time-domain simulation of the linearized two-class model.

The state is advanced in Riemann coordinates with first-order upwinding and
explicit sources. The exponential state scaling is folded into the upwind
difference (``w_i - exp(-rate h) w_{i-1}``) so that the update is exactly the
image of characteristic upwinding of ``Theta^-1 z``; :func:`simulate_physical`
runs that scheme directly on ``z`` as an independent cross-check.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import BacksteppingTransform, FeedbackGains, beta_at_outlet, convergence_time, trapezoid_weights
from .errors import CFLError, ValidationError
from .kernel import KernelSolution
from .model import EquilibriumState
from .riemann import RiemannSystem

log = logging.getLogger(__name__)

# explicit source update is halved until dt * |Sigma| stays below this
SOURCE_STIFFNESS = 0.5


class Mode(enum.Enum):
    OPEN_LOOP = "open"
    CLOSED_LOOP = "closed"
    TARGET = "target"


@dataclass(frozen=True)
class SimConfig:
    N: int = 400
    cfl: float = 0.9
    t_end: float | None = None  # None: 1.5 t_F
    mode: Mode = Mode.CLOSED_LOOP
    output_stride: int = 10
    record_beta: bool = False

    def __post_init__(self):
        if self.N < 32:
            raise ValidationError(f"sim.N must be at least 32, got {self.N}")
        if not 0 < self.cfl <= 1:
            raise ValidationError(f"sim.cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end is not None and not self.t_end > 0:
            raise ValidationError(f"sim.t_end must be positive, got {self.t_end}")
        if self.output_stride < 1:
            raise ValidationError("sim.output_stride must be at least 1")
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))


@dataclass
class SimResult:
    mode: Mode
    x: np.ndarray
    dt: float
    tF: float
    times: np.ndarray  # frame times
    fields: np.ndarray | None  # (frames, n, 4) absolute rho1, v1, rho2, v2
    t: np.ndarray  # every step
    U: np.ndarray
    supnorm: np.ndarray
    l2norm: np.ndarray
    betaL: np.ndarray
    beta_frames: np.ndarray | None = None  # (frames, n)
    w_frames: np.ndarray | None = field(default=None, repr=False)

    def value_at(self, series: np.ndarray, t: float) -> float:
        """Series entry at the first step time >= ``t``."""
        k = int(np.searchsorted(self.t, t - 1e-9 * max(1.0, abs(t))))
        return float(series[min(k, series.size - 1)])


def grid_nodes(L: float, N: int) -> np.ndarray:
    """``N`` cells, ``N + 1`` nodes on ``[0, L]``."""
    return np.linspace(0.0, L, N + 1)


def initial_profiles(eq: EquilibriumState, x, L: float | None = None) -> np.ndarray:
    """Sinusoidal stop-and-go profile, absolute ``(rho1, v1, rho2, v2)`` per node."""
    L = eq.params.L if L is None else L
    s = np.sin(4.0 * np.pi * np.asarray(x, dtype=float) / L) / 4.0
    return np.column_stack(
        [eq.rho1s * (1 + s), eq.v1s * (1 - s), eq.rho2s * (1 + s), eq.v2s * (1 - s)]
    )


def perturbation_norms(z, x, eq: EquilibriumState) -> tuple[float, float]:
    """Sup and L2 (per unit length) norms of ``z / z*`` over all four fields."""
    psi = np.asarray(z) / eq.zstar
    sup = float(np.max(np.abs(psi)))
    l2 = math.sqrt(float(trapezoid_weights(x) @ np.sum(psi**2, axis=1)) / (x[-1] - x[0]))
    return sup, l2


def stable_dt(rs: RiemannSystem, h: float, cfl: float, x=None) -> float:
    dt = cfl * h / float(np.max(np.abs(rs.speeds)))
    x = np.linspace(0.0, rs.L, 64) if x is None else x
    S = rs.Sigma(x) + np.diag(np.diag(rs.Jw))
    snorm = float(np.max(np.sum(np.abs(S), axis=-1)))
    while dt * snorm > SOURCE_STIFFNESS:
        dt *= 0.5
    return dt


class RiemannStepper:
    """One explicit upwind step of the Riemann-coordinate system.

    ``ubar`` (open/closed loop) is handled by :meth:`step`: ``None`` means
    open loop; otherwise ``gains`` make the outlet value implicit in ``w4(L)``.
    """

    def __init__(self, rs: RiemannSystem, x, dt: float, gains: FeedbackGains | None = None):
        self.rs = rs
        self.x = np.asarray(x, dtype=float)
        h = self.x[1] - self.x[0]
        if not np.allclose(np.diff(self.x), h):
            raise ValueError("simulation grid must be uniform")
        self.h, self.dt = h, dt
        courant = np.abs(rs.speeds) * dt / h
        if np.any(courant > 1 + 1e-12):
            raise CFLError(f"CFL violated: Courant numbers {courant.round(4).tolist()}")
        self.C = courant
        # exponential fitting of the scaled upwind difference
        self.fit = np.r_[np.exp(-rs.rates[:3] * h), np.exp(rs.rates[3] * h)]
        self.S = rs.Sigma(self.x) + np.diag(np.diag(rs.Jw))
        self.gains = gains
        if gains is not None:
            if gains.x.shape != self.x.shape or not np.allclose(gains.x, self.x):
                raise ValueError("gains must be built on the simulation nodes")
            s = rs.input_scale()
            Gw = gains.weights[:, None] * np.einsum("nk,nkj->nj", gains.integral_gain, rs.T(self.x))
            Gw[-1] += gains.boundary_gain @ rs.T(rs.L)
            self._Gw = Gw
            self._s = s
            self._w4L = 1.0 - Gw[-1, 3] / s

    def step(self, w: np.ndarray, closed: bool = False) -> tuple[np.ndarray, float]:
        """Advance ``w`` (n, 4) by ``dt``; returns the new state and ``U``."""
        dt, C, fit = self.dt, self.C, self.fit
        new = w + dt * np.einsum("nij,nj->ni", self.S, w)
        new[1:, :3] -= C[:3] * (w[1:, :3] - fit[:3] * w[:-1, :3])
        new[:-1, 3] -= C[3] * (w[:-1, 3] - fit[3] * w[1:, 3])
        new[0, :3] = self.rs.Q0bar * new[0, 3]
        U = 0.0
        rest = self.rs.R1bar @ new[-1, :3]
        if closed:
            new[-1, 3] = 0.0
            U_known = float(np.sum(self._Gw * new))
            new[-1, 3] = (rest + U_known / self._s) / self._w4L
            U = U_known + self._Gw[-1, 3] * new[-1, 3]
        else:
            new[-1, 3] = rest
        return new, U


def _frame_indices(n_steps: int, stride: int) -> list[int]:
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return idx


def run(
    config: SimConfig,
    eq: EquilibriumState,
    rs: RiemannSystem,
    gains: FeedbackGains | None = None,
    kernels: KernelSolution | None = None,
    w0=None,
) -> SimResult:
    """Simulate from the sinusoidal profile (or Riemann data ``w0``).

    Closed loop needs ``gains`` built on the simulation nodes; ``kernels`` are
    needed for the target mode and for ``record_beta``.
    """
    x = grid_nodes(rs.L, config.N)
    h = x[1] - x[0]
    tF = convergence_time(rs)
    t_end = 1.5 * tF if config.t_end is None else config.t_end
    mode = config.mode
    if w0 is None:
        z0 = initial_profiles(eq, x, rs.L) - eq.zstar
        w0 = rs.to_riemann(z0, x)
    w = np.array(w0, dtype=float)

    if mode is Mode.TARGET:
        return _run_target(config, rs, x, w, kernels, t_end, tF)

    closed = mode is Mode.CLOSED_LOOP
    if closed and gains is None:
        raise ValidationError("closed-loop simulation needs feedback gains")
    dt = stable_dt(rs, h, config.cfl, x)
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / n_steps
    stepper = RiemannStepper(rs, x, dt, gains if closed else None)
    transform = BacksteppingTransform(kernels, x) if (config.record_beta and kernels is not None) else None

    frames = set(_frame_indices(n_steps, config.output_stride))
    times, fields, wf, bf = [], [], [], []
    ts = np.arange(n_steps + 1) * dt
    U = np.zeros(n_steps + 1)
    sup = np.zeros(n_steps + 1)
    l2 = np.zeros(n_steps + 1)
    betaL = np.full(n_steps + 1, np.nan)

    def record(k, w, u):
        z = rs.from_riemann(w, x)
        sup[k], l2[k] = perturbation_norms(z, x, eq)
        U[k] = u
        if gains is not None:
            betaL[k] = beta_at_outlet(gains, w)
        if k in frames:
            times.append(ts[k])
            fields.append(z + eq.zstar)
            wf.append(w.copy())
            if transform is not None:
                bf.append(transform(w)[1])

    u0 = 0.0
    if closed:
        # U at t = 0 from the control law applied to the initial state
        u0 = float(np.sum(stepper._Gw * w))
    record(0, w, u0)
    for k in range(1, n_steps + 1):
        w, u = stepper.step(w, closed)
        record(k, w, u)
    log.info("%s run: %d steps, dt=%.4g, final sup-norm %.3e", mode.value, n_steps, dt, sup[-1])
    return SimResult(
        mode=mode,
        x=x,
        dt=dt,
        tF=tF,
        times=np.array(times),
        fields=np.array(fields),
        t=ts,
        U=U,
        supnorm=sup,
        l2norm=l2,
        betaL=betaL,
        beta_frames=np.array(bf) if bf else None,
        w_frames=np.array(wf),
    )


def _run_target(config, rs, x, w, kernels, t_end, tF) -> SimResult:
    """Upwind transport of ``beta`` alone with ``beta(L) = 0``."""
    if kernels is None:
        raise ValidationError("target-system simulation needs the kernels")
    h = x[1] - x[0]
    beta = BacksteppingTransform(kernels, x)(w)[1]
    m4 = rs.LambdaMinus
    # keep the Courant number exactly at cfl (cfl = 1 shifts beta by one cell per step)
    dt = config.cfl * h / m4
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    C = config.cfl
    if C > 1 + 1e-12:
        raise CFLError(f"CFL violated: Courant number {C:.4f}")
    frames = set(_frame_indices(n_steps, config.output_stride))
    ts = np.arange(n_steps + 1) * dt
    sup = np.zeros(n_steps + 1)
    l2 = np.zeros(n_steps + 1)
    betaL = np.zeros(n_steps + 1)
    times, bf = [], []
    wts = trapezoid_weights(x)
    for k in range(n_steps + 1):
        if k:
            new = beta.copy()
            new[:-1] -= C * (beta[:-1] - beta[1:])
            new[-1] = 0.0
            beta = new
        sup[k] = float(np.max(np.abs(beta)))
        l2[k] = math.sqrt(float(wts @ beta**2) / rs.L)
        betaL[k] = beta[-1]
        if k in frames:
            times.append(ts[k])
            bf.append(beta.copy())
    return SimResult(
        mode=Mode.TARGET,
        x=x,
        dt=dt,
        tF=tF,
        times=np.array(times),
        fields=None,
        t=ts,
        U=np.zeros(n_steps + 1),
        supnorm=sup,
        l2norm=l2,
        betaL=betaL,
        beta_frames=np.array(bf),
    )


def simulate_physical(
    eq: EquilibriumState,
    Theta: np.ndarray,
    x,
    z0,
    dt: float,
    n_steps: int,
    gains: FeedbackGains | None = None,
) -> np.ndarray:
    """Characteristic-upwind scheme on ``z`` with the physical boundary conditions.

    Used to cross-check the Riemann-coordinate simulator: it never touches
    ``Q0bar``, ``R1bar`` or the exponential scaling. Returns ``z`` after
    ``n_steps`` steps. With ``gains`` the outlet flow follows the feedback law.
    """
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    Ti = np.linalg.inv(Theta)
    lam = np.diag(Ti @ eq.convection @ Theta)
    Ap = Theta @ np.diag(np.maximum(lam, 0)) @ Ti
    Am = Theta @ np.diag(np.minimum(lam, 0)) @ Ti
    B = eq.relaxation
    c = eq.flow_row
    neg = int(np.argmin(lam))
    pos = [k for k in range(4) if k != neg]
    inlet = np.vstack([np.eye(4)[0], np.eye(4)[2], c, Ti[neg]])
    outlet = np.vstack([Ti[pos], c])
    if gains is not None:
        wts = gains.weights
        Gz = wts[:, None] * gains.integral_gain
        Gz[-1] += gains.boundary_gain
        outlet = np.vstack([Ti[pos], c - Gz[-1]])
    z = np.array(z0, dtype=float)
    for _ in range(n_steps):
        new = z - dt * z @ B.T
        new[1:] -= dt / h * (z[1:] - z[:-1]) @ Ap.T
        new[:-1] -= dt / h * (z[1:] - z[:-1]) @ Am.T
        # inlet: outgoing characteristic from the update, three physical conditions
        new[0] = np.linalg.solve(inlet, np.r_[0.0, 0.0, 0.0, Ti[neg] @ new[0]])
        rhs = Ti[pos] @ new[-1]
        if gains is not None:
            u_known = float(np.sum(Gz[:-1] * new[:-1]))
            new[-1] = np.linalg.solve(outlet, np.r_[rhs, u_known])
        else:
            new[-1] = np.linalg.solve(outlet, np.r_[rhs, 0.0])
        z = new
    return z
