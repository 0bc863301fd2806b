"""Decentralized event-triggered mechanism for one network."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np


class EtmError(ValueError):
    """Raised when ETM parameters fall outside the admissible design region."""


def rho_bar(Lbar0: float, gamma0: float) -> float:
    if not gamma0 > 0:
        raise EtmError(f"gamma0 must be positive, got {gamma0}")
    if Lbar0 <= -gamma0:
        return 1.0
    return min(1.0, 1.0 / (Lbar0 + gamma0))


def lambda_bar(lam: float, rho: float, gamma0: float, Lbar0: float) -> float:
    denom = 1.0 - rho * Lbar0
    if denom <= 0:
        raise EtmError(f"1 - rho*Lbar0 = {denom} must be positive")
    value = max(lam, rho * gamma0 / denom)
    if value >= 1.0:
        warnings.warn(f"lambda_bar = {value:.4g} >= 1 lies outside the valid design region", stacklevel=2)
    return value


def triggered(gamma_value: float) -> bool:
    return gamma_value >= 0.0


@dataclass(frozen=True)
class EtmParams:
    """ETM constants plus the two state functions the trigger rule reads.

    ``w_fn(e_i, mu_i, m_i, kappa_i, b_i)`` measures the network error and
    ``phi_fn(z_i)`` the local state cost. Both are supplied by the model.
    """

    rho: float
    lam: float
    gamma0: float
    gamma1: float
    Lbar0: float
    w_fn: Callable | None = None
    phi_fn: Callable | None = None
    allow_rho_above_bar: bool = False

    def __post_init__(self):
        if self.rho < 0:
            raise EtmError(f"rho must be nonnegative, got {self.rho}")
        if not 0 <= self.lam < 1:
            raise EtmError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.gamma0 <= 0 or self.gamma1 <= 0:
            raise EtmError("gamma0 and gamma1 must be positive")
        if not self.allow_rho_above_bar and self.rho >= self.rho_bar:
            raise EtmError(f"rho = {self.rho} must be below rho_bar = {self.rho_bar:.6g}")

    @property
    def rho_bar(self) -> float:
        return rho_bar(self.Lbar0, self.gamma0)

    @property
    def lambda_bar(self) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return lambda_bar(self.lam, self.rho, self.gamma0, self.Lbar0)

    def with_rho(self, rho: float) -> "EtmParams":
        return EtmParams(rho, self.lam, self.gamma0, self.gamma1, self.Lbar0,
                         self.w_fn, self.phi_fn, self.allow_rho_above_bar)


def gamma_value(w: float, phi: float, b: int, params: EtmParams) -> float:
    """Trigger function from precomputed ``W`` and state cost values."""
    gamma_b = params.gamma1 if b else params.gamma0
    return (1 - 2 * b) * gamma_b * w * w - (1 - b) * params.rho * params.lambda_bar * phi


def gamma_fn(z_i, e_i, mu_i, m_i, kappa_i: int, b_i: int, params: EtmParams) -> float:
    if params.w_fn is None or params.phi_fn is None:
        raise EtmError("EtmParams needs w_fn and phi_fn to evaluate the trigger function")
    w = float(params.w_fn(np.asarray(e_i), np.asarray(mu_i), np.asarray(m_i), kappa_i, b_i))
    phi = float(params.phi_fn(np.asarray(z_i))) if b_i == 0 else 0.0
    return gamma_value(w, phi, b_i, params)
