import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from etnqcs.config import design_lambda_bar
from etnqcs.design import (DesignError, InfeasibleDesign, PhiParams, check_conditions, check_phi_params,
                           max_T_Delta, solve_phi)

# feasible reference case; expected values frozen from the scipy route below
P0 = PhiParams(L=1.0, gamma=2.0, varrho=0.1, phi0=1.5)
P1 = PhiParams(L=2.0, gamma=2.5, varrho=0.1, phi0=1.5)
LB = 0.5
T_REF, DELTA_REF = 0.16671983, 0.04223556


def _scipy_phi(p, horizon):
    def f(t, y):
        return [-2 * p.L * y[0] - p.gamma * ((1 + p.varrho) * y[0] ** 2 + 1)]
    return solve_ivp(f, (0, horizon), [p.phi0], method="DOP853", rtol=1e-12, atol=1e-14,
                     dense_output=True).sol


def _first_root(g, hi, n=4000):
    ts = np.linspace(0.0, hi, n)
    vals = [g(t) for t in ts]
    for k in range(n - 1):
        if vals[k] >= 0 > vals[k + 1]:
            return brentq(g, ts[k], ts[k + 1], xtol=1e-14)
    return None


def scipy_oracle(p0, p1, lb):
    """Root-finding on a high-order solution; no bisection, no shared code."""
    horizon = 1.05 * max(p0.phi0 / p0.gamma, p1.phi0 / p1.gamma)
    s0, s1 = _scipy_phi(p0, horizon), _scipy_phi(p1, horizon)
    K = (1 + p1.varrho) * lb ** 2 * p1.gamma * p1.phi0
    if p0.gamma * p0.phi0 < K or p1.gamma * p1.phi0 < (1 + p0.varrho) * p0.gamma * p0.phi0:
        return None
    roots = [_first_root(lambda t: p0.gamma * s0(t)[0] - K, horizon),
             _first_root(lambda t: s0(t)[0], horizon), _first_root(lambda t: s1(t)[0], horizon)]
    T = min(r for r in roots if r is not None)
    D = _first_root(lambda t: p1.gamma * s1(t)[0] - (1 + p0.varrho) * p0.gamma * s0(t)[0], T)
    return T, T if D is None else D


def test_tangent_oracle():
    traj = solve_phi(PhiParams(0.0, 1.0, 0.0, 1.0), horizon=0.7, step=1e-3)
    err = np.max(np.abs(traj.phi - np.tan(math.pi / 4 - traj.t)))
    assert err <= 1e-8


def test_tangent_oracle_to_blow_down():
    # zero at pi/4; check the first 90 % of the interval
    traj = solve_phi(PhiParams(0.0, 1.0, 0.0, 1.0), horizon=0.9 * math.pi / 4, step=1e-4)
    assert np.max(np.abs(traj.phi - np.tan(math.pi / 4 - traj.t))) <= 1e-8


def test_crossing_time_reported():
    traj = solve_phi(PhiParams(0.0, 1.0, 0.0, 1.0), horizon=1.0, step=1e-4)
    assert traj.crossing == pytest.approx(math.pi / 4, abs=1e-6)


def test_varrho_closed_form():
    k = 1.3
    traj = solve_phi(PhiParams(0.0, 2.0, k - 1.0, 1.2), horizon=0.2, step=1e-4)
    exact = np.tan(math.atan(math.sqrt(k) * 1.2) - 2.0 * math.sqrt(k) * traj.t) / math.sqrt(k)
    assert np.max(np.abs(traj.phi - exact)) <= 1e-9


def test_linear_limit():
    traj = solve_phi(PhiParams(1.0, 1e-9, 0.0, 1.5), horizon=2.0, step=1e-3)
    assert np.max(np.abs(traj.phi - 1.5 * np.exp(-2 * traj.t))) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 20), st.floats(0.1, 50), st.floats(0.01, 1), st.floats(1.0, 3.0))
def test_strictly_decreasing(L, g, r, phi0):
    traj = solve_phi(PhiParams(L, g, r, phi0), horizon=phi0 / g, step=phi0 / g / 500)
    nonneg = traj.phi >= 0
    assert np.all(np.diff(traj.phi[nonneg]) < 0)


def test_step_must_be_positive():
    with pytest.raises(DesignError):
        solve_phi(P0, 1.0, 0.0)


def test_T_zero_reduces_to_point_check():
    tr0 = solve_phi(P0, 1.0, 1e-4)
    tr1 = solve_phi(P1, 1.0, 1e-4)
    lhs = P0.gamma * P0.phi0
    rhs = (1 + P1.varrho) * LB ** 2 * P1.gamma * P1.phi0
    assert check_conditions(tr0, tr1, P0.gamma, P1.gamma, LB, P0.varrho, P1.varrho, 0.0, 0.0) == (lhs >= rhs)
    big = math.sqrt(lhs / ((1 + P1.varrho) * P1.gamma * P1.phi0)) * 1.01
    assert not check_conditions(tr0, tr1, P0.gamma, P1.gamma, big, P0.varrho, P1.varrho, 0.0, 0.0)


def test_domain_shortfall():
    tr0 = solve_phi(P0, 0.01, 1e-4)
    tr1 = solve_phi(P1, 0.01, 1e-4)
    with pytest.raises(DesignError):
        check_conditions(tr0, tr1, P0.gamma, P1.gamma, LB, P0.varrho, P1.varrho, 0.05, 0.0)
    with pytest.raises(DesignError):
        check_conditions(tr0, tr1, P0.gamma, P1.gamma, LB, P0.varrho, P1.varrho, 0.001, 0.002)


def test_frozen_reference_design():
    res = max_T_Delta(P0, P1, LB, tol=1e-7)
    assert res.T == pytest.approx(T_REF, abs=1e-6)
    assert res.Delta == pytest.approx(DELTA_REF, abs=1e-6)


def test_matches_scipy_oracle():
    T, D = scipy_oracle(P0, P1, LB)
    assert (T, D) == pytest.approx((T_REF, DELTA_REF), abs=1e-7)
    res = max_T_Delta(P0, P1, LB, tol=1e-7)
    assert res.T == pytest.approx(T, abs=1e-6)
    assert res.Delta == pytest.approx(D, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.5, 5.0), st.floats(0.5, 5.0))
def test_random_cases_match_oracle(L0, L1, g0, g1):
    p0, p1 = PhiParams(L0, g0, 0.1, 1.4), PhiParams(L1, g1, 0.1, 1.4)
    try:
        res = max_T_Delta(p0, p1, 0.6, tol=1e-7)
    except InfeasibleDesign:
        assert scipy_oracle(p0, p1, 0.6) is None
        return
    T, D = scipy_oracle(p0, p1, 0.6)
    assert res.T == pytest.approx(T, abs=1e-5)
    assert res.Delta == pytest.approx(D, abs=1e-5)


def test_maximality_certificate():
    tol = 1e-5
    res = max_T_Delta(P0, P1, LB, tol=tol)
    tr0, tr1 = res.phi0_samples, res.phi1_samples
    args = (P0.gamma, P1.gamma, LB, P0.varrho, P1.varrho)
    assert check_conditions(tr0, tr1, *args, res.T, res.Delta)
    assert not check_conditions(tr0, tr1, *args, res.T + tol, 0.0)
    assert not check_conditions(tr0, tr1, *args, res.T, res.Delta + tol)


def test_larger_L_shrinks_T():
    base = max_T_Delta(P0, P1, LB)
    assert max_T_Delta(replace(P0, L=1.5 * P0.L), P1, LB).T < base.T
    # L1 only enters through the delay condition
    assert max_T_Delta(P0, replace(P1, L=1.5 * P1.L), LB).Delta < base.Delta


def test_larger_gamma_shrinks_T():
    # scaling both keeps the T = 0 inequalities unchanged
    base = max_T_Delta(P0, P1, LB).T
    assert max_T_Delta(replace(P0, gamma=1.5 * P0.gamma), replace(P1, gamma=1.5 * P1.gamma), LB).T < base


def test_limit_case_infeasible():
    p = PhiParams(5.0, 5.0, 1e-3, 1.0 + 1e-4)
    with pytest.raises(InfeasibleDesign):
        max_T_Delta(p, p, 1.0 - 1e-4, tol=1e-3)


def test_phi_param_ranges():
    assert check_phi_params(PhiParams(0, 1, 0.05, 1.1023), math.sqrt(2 / 3)) == []
    assert check_phi_params(PhiParams(0, 1, 0.05, 0.8816), math.sqrt(2 / 3))


def test_params_validation():
    with pytest.raises(DesignError):
        PhiParams(-1.0, 1.0, 0.1, 1.0)
    with pytest.raises(DesignError):
        PhiParams(1.0, 0.0, 0.1, 1.0)


def _reference_case(cfg, k):
    spec = cfg.design[k]
    lb = design_lambda_bar(cfg, k)
    tr0, tr1 = solve_phi(spec.p0, 0.06, 1e-6), solve_phi(spec.p1, 0.06, 1e-6)
    return tr0, tr1, (spec.p0.gamma, spec.p1.gamma, lb, spec.p0.varrho, spec.p1.varrho)


def test_reference_rr_point_passes_conditions(rr_cfg):
    tr0, tr1, args = _reference_case(rr_cfg, 0)
    assert check_conditions(tr0, tr1, *args, 0.0256, 0.0064)


def test_reference_rr_doubled_T_fails(rr_cfg):
    tr0, tr1, args = _reference_case(rr_cfg, 0)
    assert not check_conditions(tr0, tr1, *args, 0.0512, 0.0064)
