"""Independent reference computations used by the tests.

None of these call into the package's numerical routines beyond plain data
access, so agreement is meaningful.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
import sympy as sp


def symbolic_jacobians(p, rho1s: float, rho2s: float):
    """``(Jt, Jx, J, v1s, v2s)`` by differentiating the nonlinear model with sympy.

    Quasilinear form of the model per class ``i``:
        rho_i,t + (rho_i v_i)_x = 0
        (v_i + p_i(AO))_t + v_i (v_i + p_i(AO))_x = (Ve_i(AO) - v_i) / tau_i
    """
    r1, u1, r2, u2 = sp.symbols("r1 u1 r2 u2", positive=True)
    z = [r1, u1, r2, u2]
    AO = (sp.Rational(str(p.a1)) * r1 + sp.Rational(str(p.a2)) * r2) / sp.Rational(str(p.W))

    def pres(i):
        V = sp.Rational(str(p.V(i)))
        return V * (AO / sp.Rational(str(p.AObar(i)))) ** sp.Rational(str(p.gamma(i)))

    def Ve(i):
        return sp.Rational(str(p.V(i))) - pres(i)

    time_terms = [r1, u1 + pres(1), r2, u2 + pres(2)]
    Jt = sp.Matrix(time_terms).jacobian(z)
    mass1 = sp.Matrix([r1 * u1]).jacobian(z)
    mass2 = sp.Matrix([r2 * u2]).jacobian(z)
    mom1 = u1 * sp.Matrix([u1 + pres(1)]).jacobian(z)
    mom2 = u2 * sp.Matrix([u2 + pres(2)]).jacobian(z)
    Jx = sp.Matrix.vstack(mass1, mom1, mass2, mom2)
    rhs = sp.Matrix([0, (Ve(1) - u1) / sp.Rational(str(p.tau1)), 0, (Ve(2) - u2) / sp.Rational(str(p.tau2))])
    J = -rhs.jacobian(z)

    AOs = AO.subs({r1: sp.Rational(str(rho1s)), r2: sp.Rational(str(rho2s))})
    v1s = Ve(1).subs({r1: sp.Rational(str(rho1s)), r2: sp.Rational(str(rho2s))})
    v2s = Ve(2).subs({r1: sp.Rational(str(rho1s)), r2: sp.Rational(str(rho2s))})
    at = {r1: sp.Rational(str(rho1s)), r2: sp.Rational(str(rho2s)), u1: v1s, u2: v2s}
    del AOs
    conv = [np.array(M.subs(at).evalf(30), dtype=float) for M in (Jt, Jx, J)]
    return (*conv, float(v1s), float(v2s))


def eigenvalues_mp(Jt, Jx, dps: int = 40) -> np.ndarray:
    """Sorted eigenvalues of ``Jt^-1 Jx`` in extended precision."""
    mpmath.mp.dps = dps
    A = mpmath.matrix(Jt.tolist()) ** -1 * mpmath.matrix(Jx.tolist())
    ev = mpmath.eig(A, left=False, right=False)
    return np.sort(np.array([float(mpmath.re(e)) for e in ev]))


def inlet_nullspace(flow_row, Theta, perm) -> np.ndarray:
    """``Q0bar`` from the SVD null space of the three inlet conditions.

    The inlet state ``z(0)`` must satisfy ``rho1 = rho2 = c z = 0``; the
    admissible set is a line. Mapping it to Riemann slots and normalizing by
    the ``w4`` entry gives ``Q0bar``.
    """
    B0 = np.vstack([np.eye(4)[0], np.eye(4)[2], flow_row])
    _, _, Vt = np.linalg.svd(B0)
    n = Vt[-1]
    w = np.linalg.solve(Theta, n)[np.asarray(perm)]
    return w[:3] / w[3]


def outlet_flow(rs, w_upper, w4) -> float:
    """Flow perturbation ``c . z(L)`` for Riemann outlet values."""
    T = rs.Theta[:, rs.perm] * np.exp(rs.rates * rs.L)
    return float(rs.flow_row @ (T @ np.r_[w_upper, w4]))


def march_decoupled_kernel(rs, N: int) -> np.ndarray:
    """Kernel ``K`` for ``Sigma+- = 0`` and ``Q0bar = 0`` by direct marching.

    With those data ``L11`` vanishes and each ``k1j`` obeys the local relation
        k_j(P) = k_j(P*) + int_0^{s*} sum_i k_i Sigma++_ij(xi(s)) ds
    along ``(x, xi)(s) = (x - |lambda4| s, xi + lambda_j s)``, ``P*`` on the
    diagonal. Quadrature points are the crossings with grid lines (constant xi
    when ``lambda_j >= |lambda4|``, else constant x), values there interpolate
    the two neighbouring nodes on that line, and the trapezoid rule is used
    with the node's own (unknown) value. Nodes are visited by increasing
    distance from the diagonal; each needs one 3x3 solve.
    """
    L = rs.L
    h = L / (N - 1)
    m4 = -float(rs.speeds[3])
    lam = [float(v) for v in rs.speeds[:3]]
    K = np.full((N, N, 3), np.nan)

    def Spp(xi):
        return np.asarray(rs.Sigma(np.array(xi)))[:3, :3]

    def Smp(xi):
        return np.asarray(rs.Sigma(np.array(xi)))[3, :3]

    def diag(x):
        return np.array([-Smp(x)[j] / (lam[j] + m4) for j in range(3)])

    for a in range(N):
        K[a, a] = diag(a * h)

    for d in range(1, N):
        for b in range(N - d):
            a = b + d
            x0, xi0 = a * h, b * h
            M = np.eye(3)
            rhs = np.zeros(3)
            for j in range(3):
                lj = lam[j]
                sstar = (x0 - xi0) / (lj + m4)
                ds = h / max(lj, m4)
                pts = [0.0]
                while pts[-1] + ds < sstar * (1 - 1e-12) - 1e-9 * ds:
                    pts.append(pts[-1] + ds)
                svals = pts + [sstar]
                # trapezoid weights over the (possibly short) last segment
                wts = [0.0] * len(svals)
                for q in range(len(svals) - 1):
                    seg = svals[q + 1] - svals[q]
                    wts[q] += seg / 2
                    wts[q + 1] += seg / 2
                for q, s in enumerate(svals):
                    xq, xiq = x0 - m4 * s, xi0 + lj * s
                    if q == 0:
                        # unknown node value enters the linear system
                        M[j, :] -= wts[0] * Spp(xiq)[:, j]
                        continue
                    if q == len(svals) - 1:
                        kq = diag(xiq)
                    elif lj >= m4:
                        col = int(round(xiq / h))
                        lo = int(math.floor(xq / h + 1e-9))
                        f = xq / h - lo
                        hi = min(lo + 1, N - 1)
                        kq = (1 - f) * K[lo, col] + f * K[hi, col] if hi != lo else K[lo, col]
                    else:
                        row = int(round(xq / h))
                        lo = int(math.floor(xiq / h + 1e-9))
                        f = xiq / h - lo
                        hi = lo + 1
                        kq = (1 - f) * K[row, lo] + f * K[row, hi] if hi <= row else K[row, lo]
                    rhs[j] += wts[q] * float(kq @ Spp(xiq)[:, j])
                rhs[j] += diag(x0 - m4 * sstar)[j]
            K[a, b] = np.linalg.solve(M, rhs)
    return K
