"""Run-time checks of the certificate inequalities along a trace.

Two jump surrogates are checked with all additive slack terms set to zero:

* at a transmitting sampling jump, ``W(post, b=1) <= lam * W(pre, b=0)``;
* at the update that follows it,
  ``W(e + m, Omega mu, -e - m, kappa, 0) <= W(pre, b=1)``.

The hybrid Lyapunov candidate
``U = V(x) + sum_i max(gamma_b phi_b(tau) W^2, (1 - b) rho phi_state(z))``
is also evaluated before and after every jump; increases are reported but
not counted as violations, because the zoom floor and the finite quantizer
range both sit outside the idealised setting where ``U`` is nonincreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hybrid import EventKind, HybridState, NetworkConfig, Trace
from .models import SystemModel


class MonitorError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    t: float
    j: int
    network: int
    check: str
    lhs: float
    rhs: float

    @property
    def excess(self) -> float:
        return self.lhs - self.rhs


@dataclass
class MonitorReport:
    sampling_checked: int = 0
    update_checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    u_increases: list[Violation] = field(default_factory=list)
    u_values: list[tuple[float, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, check: str) -> int:
        return sum(v.check == check for v in self.violations)

    def as_dict(self) -> dict:
        return {"sampling_checked": self.sampling_checked, "update_checked": self.update_checked,
                "sampling_violations": self.count("sampling"), "update_violations": self.count("update"),
                "u_increases": len(self.u_increases)}


def _slices(model: SystemModel):
    es = model.e_slices
    ms, start = [], 0
    for p in model.partitions:
        ms.append(slice(start, start + p.ell))
        start += p.ell
    return es, ms


def lyapunov_u(state: HybridState, model: SystemModel, configs: Sequence[NetworkConfig],
               phi_trajectories=None) -> float:
    certs = model.certificates
    es, ms = _slices(model)
    zs = model.z_of(state.delta, state.x, state.e)
    total = float(certs.V(state.x))
    for i, cfg in enumerate(configs):
        b = int(state.b[i])
        w = certs.w[i](state.e[es[i]], state.mu[ms[i]], state.m[es[i]], int(state.kappa[i]), b)
        gamma = cfg.etm.gamma1 if b else cfg.etm.gamma0
        phi = 1.0
        if phi_trajectories is not None and phi_trajectories[i] is not None:
            phi = max(float(phi_trajectories[i][b](state.tau[i])), 0.0)
        term_w = gamma * phi * w * w
        term_z = (1 - b) * cfg.etm.rho * float(certs.phi_state[i](zs[i]))
        total += max(term_w, term_z)
    return total


def lyapunov_monitor(trace: Trace, model: SystemModel, configs: Sequence[NetworkConfig],
                     phi_trajectories=None, lam: Sequence[float] | None = None,
                     tol: float = 1e-9, track_u: bool = True) -> MonitorReport:
    """Check the jump surrogates on every jump record of ``trace``.

    ``lam`` overrides the certificate contraction factors (used by the
    falsification probe). ``phi_trajectories[i]`` is a pair of callables
    ``(phi_i0, phi_i1)``; without it the timer weights are taken as 1.
    """
    certs = model.certificates
    if certs is None:
        raise MonitorError(f"model {model.name!r} has no certificates")
    lam = certs.lam if lam is None else tuple(lam)
    es, ms = _slices(model)
    report = MonitorReport()
    armed = [False] * len(configs)

    for rec in trace.records:
        if rec.kind is EventKind.FLOW:
            continue
        if rec.pre is None or rec.post is None:
            raise MonitorError(f"jump record at (t={rec.t}, j={rec.j}) has no state snapshots")
        i, pre, post = rec.network, rec.pre, rec.post
        W = certs.w[i]
        e, mu, m = pre.e[es[i]], pre.mu[ms[i]], pre.m[es[i]]
        if rec.kind is EventKind.SAMPLE:
            armed[i] = rec.triggered
            if rec.triggered:
                report.sampling_checked += 1
                lhs = W(post.e[es[i]], post.mu[ms[i]], post.m[es[i]], int(post.kappa[i]), 1)
                rhs = lam[i] * W(e, mu, m, int(pre.kappa[i]), 0)
                if lhs > rhs + tol:
                    report.violations.append(Violation(rec.t, rec.j, i, "sampling", lhs, rhs))
        elif armed[i]:
            report.update_checked += 1
            zoom = certs.zoom[i]
            lhs = W(e + m, zoom * mu, -e - m, int(pre.kappa[i]), 0)
            rhs = W(e, mu, m, int(pre.kappa[i]), 1)
            if lhs > rhs + tol:
                report.violations.append(Violation(rec.t, rec.j, i, "update", lhs, rhs))
            armed[i] = False
        if track_u:
            u0 = lyapunov_u(pre, model, configs, phi_trajectories)
            u1 = lyapunov_u(post, model, configs, phi_trajectories)
            report.u_values.append((rec.t, rec.j, u1))
            if u1 > u0 + tol * max(1.0, abs(u0)):
                report.u_increases.append(Violation(rec.t, rec.j, i, "U", u1, u0))
    return report


def check_trace_invariants(trace: Trace, configs: Sequence[NetworkConfig], model: SystemModel,
                           tol: float = 1e-9) -> list[str]:
    """Hybrid-time-domain structure, timing bounds and block locality; returns problems found."""
    problems: list[str] = []
    es, ms = _slices(model)
    prev = (-math.inf, -1)
    last_jump_j = 0
    last_sample = [None] * len(configs)
    last_kind = [None] * len(configs)
    for rec in trace.records:
        if (rec.t, rec.j) < prev:
            problems.append(f"(t, j) decreased at t={rec.t}, j={rec.j}")
        prev = (rec.t, rec.j)
        if rec.kind is EventKind.FLOW:
            continue
        if rec.j != last_jump_j + 1:
            problems.append(f"jump counter skipped from {last_jump_j} to {rec.j}")
        last_jump_j = rec.j
        i, cfg = rec.network, configs[rec.network]
        if rec.kind is EventKind.SAMPLE:
            if last_kind[i] is EventKind.SAMPLE:
                problems.append(f"network {i}: two samplings without an update at t={rec.t}")
            if last_sample[i] is not None:
                gap = rec.t - last_sample[i]
                if not cfg.eps_min - tol <= gap <= cfg.masp + tol:
                    problems.append(f"network {i}: sampling gap {gap:.9g} outside [eps, T] at t={rec.t}")
            last_sample[i] = rec.t
        else:
            if last_kind[i] is not EventKind.SAMPLE:
                problems.append(f"network {i}: update without a pending sampling at t={rec.t}")
            elif rec.t - last_sample[i] > cfg.mad + tol:
                problems.append(f"network {i}: delay {rec.t - last_sample[i]:.9g} exceeds MAD at t={rec.t}")
        last_kind[i] = rec.kind
        if rec.pre is not None and rec.post is not None:
            pre, post = rec.pre, rec.post
            if not np.array_equal(pre.x, post.x):
                problems.append(f"jump changed x at t={rec.t}")
            if not np.array_equal(pre.delta, post.delta):
                problems.append(f"jump changed delta at t={rec.t}")
            for k in range(len(configs)):
                if k == i:
                    continue
                same = (np.array_equal(pre.e[es[k]], post.e[es[k]]) and np.array_equal(pre.m[es[k]], post.m[es[k]])
                        and np.array_equal(pre.mu[ms[k]], post.mu[ms[k]]) and pre.tau[k] == post.tau[k]
                        and pre.kappa[k] == post.kappa[k] and pre.b[k] == post.b[k])
                if not same:
                    problems.append(f"jump of network {i} touched network {k} at t={rec.t}")
            if rec.kind is EventKind.SAMPLE and post.kappa[i] != pre.kappa[i] + int(rec.triggered):
                problems.append(f"network {i}: kappa did not follow the trigger verdict at t={rec.t}")
    return problems
