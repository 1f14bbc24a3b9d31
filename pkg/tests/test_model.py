import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import eigenvalues_mp, symbolic_jacobians
from twoclass_ar.errors import DomainError, InfeasibleEquilibriumError, OrderingError, ValidationError
from twoclass_ar.model import (
    ModelParams,
    Regime,
    area_occupancy,
    characteristic_basis,
    characteristic_speeds,
    classify,
    equilibrium_from_densities,
    equilibrium_speed,
    pressure,
    pressure_sensitivities,
)

from conftest import BENCH_PARAMS, BENCH_RHO

# frozen from the sympy / mpmath oracles in oracles.py
FROZEN_V = (22.8830579850988, 13.71227709190672)
FROZEN_EIG = (-6.095262153118832, 13.712277091906723, 19.556581825020515, 22.8830579850988)
FROZEN_JT_ROW2 = (52.555879494655, 1.0, 197.08454810495627, 0.0)
FROZEN_JX_ROW4 = (839.2139296742254, 0.0, 3147.052236278345, 13.71227709190672)


def mk(**kw):
    return ModelParams(**{**BENCH_PARAMS, **kw})


@st.composite
def model_params(draw):
    f = lambda lo, hi: draw(st.floats(lo, hi, allow_nan=False, allow_infinity=False))
    return ModelParams(
        V1=f(5, 60), V2=f(5, 60), gamma1=f(1.01, 6), gamma2=f(1.01, 6),
        AObar1=f(0.05, 0.99), AObar2=f(0.05, 0.99), tau1=f(1, 120), tau2=f(1, 120),
        a1=f(1, 60), a2=f(1, 60), W=f(2, 20), L=f(100, 5000),
    )


# -- closures ------------------------------------------------------------------


def test_area_occupancy_examples():
    p = mk(a1=2.0, a2=4.0, W=6.0)
    assert area_occupancy(0, 0, p) == 0
    assert area_occupancy(p.W / (2 * p.a1), 0, p) == pytest.approx(0.5, abs=1e-15)
    assert area_occupancy(0.05, 0.02, p) == pytest.approx(0.03, abs=1e-15)


def test_area_occupancy_vectorized_and_linear():
    p = mk()
    r = np.linspace(0, 0.1, 5)
    ao = area_occupancy(r, 2 * r, p)
    assert ao.shape == (5,)
    np.testing.assert_allclose(np.diff(ao, 2), 0, atol=1e-15)


@pytest.mark.parametrize("args", [(-0.1, 0.0), (0.0, -1e-9)])
def test_negative_density_rejected(args):
    with pytest.raises(DomainError):
        area_occupancy(*args, mk())


def test_pressure_examples():
    p = mk(gamma1=2.0, gamma2=2.0)
    for i in (1, 2):
        assert pressure(0.0, i, p) == 0
        assert pressure(p.AObar(i), i, p) == pytest.approx(p.V(i), rel=1e-15)
        assert pressure(p.AObar(i) / 2, i, p) == pytest.approx(p.V(i) / 4, rel=1e-15)
        assert equilibrium_speed(0.0, i, p) == p.V(i)
        assert equilibrium_speed(p.AObar(i), i, p) == pytest.approx(0, abs=1e-12)
        assert equilibrium_speed(p.AObar(i) / 2, i, p) == pytest.approx(0.75 * p.V(i), rel=1e-15)


def test_closures_reject_negative_occupancy():
    with pytest.raises(DomainError):
        pressure(-0.01, 1, mk())
    with pytest.raises(DomainError):
        equilibrium_speed(-0.01, 2, mk())


def test_pressure_monotone():
    p = mk()
    ao = np.linspace(0, 0.6, 50)
    assert np.all(np.diff(pressure(ao, 1, p)) > 0)


@settings(max_examples=200, deadline=None)
@given(model_params(), st.floats(0, 1))
def test_pressure_plus_speed_is_free_flow_speed(p, frac):
    for i in (1, 2):
        ao = frac * p.AObar(i)
        assert abs(pressure(ao, i, p) + equilibrium_speed(ao, i, p) - p.V(i)) <= 1e-12 * p.V(i)


@pytest.mark.parametrize(
    "field, value, msg",
    [
        ("gamma1", 0.5, "gamma must exceed 1"),
        ("gamma2", 1.0, "gamma must exceed 1"),
        ("AObar1", 1.2, "AObar1"),
        ("AObar2", 0.0, "AObar2"),
        ("tau1", -1.0, "tau1"),
        ("W", 0.0, "W"),
        ("L", float("nan"), "L"),
    ],
)
def test_params_invariants(field, value, msg):
    with pytest.raises(ValidationError, match=msg):
        mk(**{field: value})


def test_class_index_checked():
    with pytest.raises(ValueError):
        mk().V(3)


# -- equilibrium and linearization ---------------------------------------------


def test_equilibrium_matches_symbolic_oracle(params):
    eq = equilibrium_from_densities(*BENCH_RHO, params)
    Jt, Jx, J, v1, v2 = symbolic_jacobians(params, *BENCH_RHO)
    assert (eq.v1s, eq.v2s) == pytest.approx((v1, v2), rel=1e-14)
    np.testing.assert_allclose(eq.Jt, Jt, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(eq.Jx, Jx, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(eq.J, J, rtol=1e-13, atol=1e-15)


def test_equilibrium_frozen_values(eq):
    assert (eq.v1s, eq.v2s) == pytest.approx(FROZEN_V, rel=1e-13)
    np.testing.assert_allclose(eq.Jt[1], FROZEN_JT_ROW2, rtol=1e-13)
    np.testing.assert_allclose(eq.Jx[3], FROZEN_JX_ROW4, rtol=1e-13)


def test_equilibrium_structure(eq):
    assert np.linalg.det(eq.Jt) == pytest.approx(1.0, abs=1e-12)
    assert eq.Jx[0, 1] == eq.rho1s
    assert np.all(eq.beta > 0)
    assert eq.v1s > eq.v2s
    ao = area_occupancy(eq.rho1s, eq.rho2s, eq.params)
    assert eq.v1s == pytest.approx(equilibrium_speed(ao, 1, eq.params), rel=1e-15)


def test_beta_ratio_independent_of_state(params):
    for r1, r2 in [(0.01, 0.001), (0.1, 0.03), BENCH_RHO]:
        b = pressure_sensitivities(r1, r2, params)
        assert b[0, 0] / b[0, 1] == pytest.approx(params.a1 / params.a2, rel=1e-13)
        assert b[1, 0] / b[1, 1] == pytest.approx(params.a1 / params.a2, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(model_params(), st.floats(0.05, 0.9), st.floats(0.05, 0.95))
def test_beta_matches_finite_differences(p, load, share):
    AO = load * min(p.AObar1, p.AObar2)
    r1 = share * AO * p.W / p.a1
    r2 = (1 - share) * AO * p.W / p.a2
    beta = pressure_sensitivities(r1, r2, p)
    for i in (1, 2):
        for j, (d1, d2) in enumerate([(1, 0), (0, 1)], start=1):
            eps = 1e-6 * (r1 if j == 1 else r2)
            plus = pressure(area_occupancy(r1 + d1 * eps, r2 + d2 * eps, p), i, p)
            minus = pressure(area_occupancy(r1 - d1 * eps, r2 - d2 * eps, p), i, p)
            fd = (plus - minus) / (2 * eps)
            assert beta[i - 1, j - 1] == pytest.approx(fd, rel=1e-6)


def test_light_traffic_speeds_approach_free_flow(params):
    eq = equilibrium_from_densities(1e-9, 1e-9, params, require_ordering=False)
    assert eq.v1s == pytest.approx(params.V1, rel=1e-12)
    assert eq.v2s == pytest.approx(params.V2, rel=1e-12)


def test_infeasible_and_unordered_equilibria(params):
    with pytest.raises(InfeasibleEquilibriumError):
        equilibrium_from_densities(0.0, 0.01, params)
    with pytest.raises(InfeasibleEquilibriumError, match="feasibility"):
        equilibrium_from_densities(0.6, 0.1, params)
    with pytest.raises(OrderingError):
        equilibrium_from_densities(0.05, 0.01, mk(V1=20.0, V2=30.0))


# -- characteristic structure --------------------------------------------------


def test_closed_form_speeds_match_extended_precision(eq):
    lam, Delta = characteristic_speeds(eq)
    ev = eigenvalues_mp(eq.Jt, eq.Jx)
    np.testing.assert_allclose(np.sort(lam), ev, rtol=1e-12)
    np.testing.assert_allclose(np.sort(lam), FROZEN_EIG, rtol=1e-13)
    assert Delta > 0


def test_basis_diagonalizes(eq, cb):
    D = np.linalg.solve(cb.Theta, eq.convection @ cb.Theta)
    scale = np.max(np.abs(cb.lam))
    np.testing.assert_allclose(D, np.diag(cb.lam), atol=1e-10 * scale)
    np.testing.assert_allclose(np.linalg.norm(cb.Theta, axis=0), 1.0, rtol=1e-14)
    Jhat = -np.linalg.solve(cb.Theta, eq.relaxation @ cb.Theta)
    np.testing.assert_allclose(cb.Jhat, Jhat, atol=1e-15)


def test_benchmark_is_congested(cb):
    assert cb.regime is Regime.CONGESTED
    assert np.sum(cb.lam < 0) == 1
    lam1, lam2, lam3, lam4 = cb.lam
    assert lam4 < 0 < lam2 < lam3 < lam1


def test_identical_classes_are_degenerate():
    p = mk(V2=30.0, gamma2=3.0, AObar2=0.7, tau2=30.0, a2=8.0)
    eq = equilibrium_from_densities(0.1, 0.1, p, require_ordering=False)
    cb = characteristic_basis(eq)
    assert cb.lam[0] == cb.lam[1]
    assert cb.regime is Regime.DEGENERATE
    assert cb.Theta is None


def test_classify():
    assert classify([3.0, 1.0, 2.0, -1.0]) is Regime.CONGESTED
    assert classify([3.0, 1.0, 2.0, 0.5]) is Regime.FREE_FLOW
    assert classify([3.0, 3.0, 2.0, -1.0]) is Regime.DEGENERATE
    assert classify([3.0, 1.0, 2.0, 0.0]) is Regime.DEGENERATE


@st.composite
def feasible_equilibrium(draw):
    p = draw(model_params())
    load = draw(st.floats(0.01, 0.98))
    share = draw(st.floats(0.02, 0.98))
    AO = load * min(p.AObar1, p.AObar2)
    return p, share * AO * p.W / p.a1, (1 - share) * AO * p.W / p.a2


@settings(max_examples=300, deadline=None)
@given(feasible_equilibrium())
def test_ordering_and_solver_agreement(sample):
    p, r1, r2 = sample
    eq = equilibrium_from_densities(r1, r2, p, require_ordering=False)
    lam, _ = characteristic_speeds(eq)
    scale = np.max(np.abs(lam))
    l1, l2, l3, l4 = lam
    assert l4 <= min(l1, l2) + 1e-12 * scale
    assert min(l1, l2) <= l3 + 1e-12 * scale
    assert l3 <= max(l1, l2) + 1e-12 * scale
    ev = np.sort(np.linalg.eigvals(eq.convection).real)
    np.testing.assert_allclose(np.sort(lam), ev, rtol=1e-8, atol=1e-8 * scale)
    cb = characteristic_basis(eq)
    if cb.regime is Regime.CONGESTED:
        assert np.sum(cb.lam < 0) == 1
