"""Timer-function ODE and the MASP/MAD search.

The timer functions solve ``phi' = -2 L phi - gamma((1 + varrho) phi^2 + 1)``
and are strictly decreasing while nonnegative. The largest sampling period
``T`` and delay ``Delta`` are found by bisection on the two inequalities

    gamma0 phi0(tau) >= (1 + varrho1) lambda_bar^2 gamma1 phi1(0),  tau in [0, T]
    gamma1 phi1(tau) >= (1 + varrho0) gamma0 phi0(tau),             tau in [0, Delta]

together with ``phi0(T) > 0`` and ``phi1(T) > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DesignError(ValueError):
    pass


class InfeasibleDesign(DesignError):
    pass


@dataclass(frozen=True)
class PhiParams:
    L: float
    gamma: float
    varrho: float
    phi0: float

    def __post_init__(self):
        if self.L < 0:
            raise DesignError(f"L must be nonnegative, got {self.L}")
        if self.gamma <= 0:
            raise DesignError(f"gamma must be positive, got {self.gamma}")
        if self.varrho < 0:
            raise DesignError(f"varrho must be nonnegative, got {self.varrho}")

    def rhs(self, phi):
        return -2.0 * self.L * phi - self.gamma * ((1.0 + self.varrho) * phi * phi + 1.0)


@dataclass(frozen=True)
class PhiTrajectory:
    t: np.ndarray
    phi: np.ndarray
    crossing: float | None = None

    @property
    def end(self) -> float:
        return float(self.t[-1])

    def __call__(self, tau):
        return np.interp(tau, self.t, self.phi)


@dataclass(frozen=True)
class DesignResult:
    T: float
    Delta: float
    phi0_samples: PhiTrajectory
    phi1_samples: PhiTrajectory

    def as_dict(self) -> dict:
        return {"T": self.T, "Delta": self.Delta,
                "phi0_0": float(self.phi0_samples.phi[0]), "phi1_0": float(self.phi1_samples.phi[0])}


def check_phi_params(p: PhiParams, lambda_bar: float) -> list[str]:
    """Problems with the admissible initial value and varrho ranges, if any."""
    problems = []
    if not 1.0 < p.phi0 < 1.0 / lambda_bar:
        problems.append(f"phi(0) = {p.phi0} outside (1, {1.0 / lambda_bar:.6g})")
    upper = 1.0 / (lambda_bar * p.phi0) ** 2 - 1.0
    if not 0.0 < p.varrho < upper:
        problems.append(f"varrho = {p.varrho} outside (0, {upper:.6g})")
    return problems


def solve_phi(p: PhiParams, horizon: float, step: float) -> PhiTrajectory:
    """Classic RK4 on a uniform grid; stops at the first zero crossing."""
    if step <= 0:
        raise DesignError(f"step must be positive, got {step}")
    if horizon <= 0:
        raise DesignError(f"horizon must be positive, got {horizon}")
    n = max(1, math.ceil(horizon / step - 1e-9))
    h = horizon / n
    ts = [0.0]
    ys = [float(p.phi0)]
    y = float(p.phi0)
    f = p.rhs
    for k in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y_new = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t_new = (k + 1) * h
        if y_new < 0.0 <= y:
            crossing = ts[-1] + h * y / (y - y_new)
            ts.append(t_new)
            ys.append(y_new)
            return PhiTrajectory(np.array(ts), np.array(ys), crossing)
        ts.append(t_new)
        ys.append(y_new)
        y = y_new
    return PhiTrajectory(np.array(ts), np.array(ys), None)


def check_conditions(phi0_traj: PhiTrajectory, phi1_traj: PhiTrajectory, gamma0: float, gamma1: float,
                     lambda_bar: float, varrho0: float, varrho1: float, T: float, Delta: float) -> bool:
    if Delta < 0 or T < Delta:
        raise DesignError(f"need T >= Delta >= 0, got T={T}, Delta={Delta}")
    for name, traj in (("phi0", phi0_traj), ("phi1", phi1_traj)):
        if traj.crossing is None and traj.end < T * (1 - 1e-12):
            raise DesignError(f"{name} trajectory ends at {traj.end}, before T = {T}")
    for traj in (phi0_traj, phi1_traj):
        if traj.crossing is not None and traj.crossing <= T:
            return False
    if phi0_traj(T) <= 0 or phi1_traj(T) <= 0:
        return False

    bound = (1 + varrho1) * lambda_bar ** 2 * gamma1 * phi1_traj.phi[0]
    tau = np.append(phi0_traj.t[phi0_traj.t <= T], T)
    if np.any(gamma0 * phi0_traj(tau) < bound):
        return False

    tau = np.union1d(phi0_traj.t[phi0_traj.t <= Delta], phi1_traj.t[phi1_traj.t <= Delta])
    tau = np.append(tau, Delta)
    return bool(np.all(gamma1 * phi1_traj(tau) >= (1 + varrho0) * gamma0 * phi0_traj(tau)))


def _bisect(ok, lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_T_Delta(p0: PhiParams, p1: PhiParams, lambda_bar: float, tol: float = 1e-5,
                samples: int = 20000) -> DesignResult:
    """Largest ``T`` and then largest ``Delta <= T`` passing the conditions."""
    if tol <= 0:
        raise DesignError(f"tol must be positive, got {tol}")
    # phi' <= -gamma while phi >= 0, so phi0 hits zero before phi0(0)/gamma
    horizon = 1.05 * max(p0.phi0 / p0.gamma, p1.phi0 / p1.gamma, tol)
    step = horizon / samples
    tr0 = solve_phi(p0, horizon, step)
    tr1 = solve_phi(p1, horizon, step)

    def ok_T(T):
        return check_conditions(tr0, tr1, p0.gamma, p1.gamma, lambda_bar, p0.varrho, p1.varrho, T, 0.0)

    if not ok_T(0.0):
        raise InfeasibleDesign("conditions fail already at T = 0")
    hi = min(c for c in (tr0.crossing, tr1.crossing, horizon) if c is not None)
    T = hi if ok_T(hi) else _bisect(ok_T, 0.0, hi, tol)
    if T < tol:
        raise InfeasibleDesign(f"largest feasible T = {T:.3g} is below tol = {tol:.3g}")

    def ok_D(D):
        return check_conditions(tr0, tr1, p0.gamma, p1.gamma, lambda_bar, p0.varrho, p1.varrho, T, D)

    Delta = T if ok_D(T) else _bisect(ok_D, 0.0, T, tol)
    return DesignResult(T, Delta, tr0, tr1)
