"""Hybrid state, flow integrator, event scheduler and jump maps.

A run alternates RK4 flows of ``(x, e)`` with two kinds of jumps per
network: a *sampling* jump, where the trigger rule decides whether the
quantized measurement is sent, and an *update* jump, where the in-flight
packet arrives. Each network keeps exactly one pending event, so global
ordering only has to compare N candidate times; ties go to samplings
first and then to the lower network index.

Update-jump semantics: ``e_i += triggered_i * m_i``, ``mu_i`` is zoomed,
``m_i := -e_i``. Foreign blocks are never touched. (The stacked-matrix
encoding of the same map can be read as overwriting other networks with
``m``; that reading is not implemented.)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .etm import EtmParams, gamma_fn
from .models import SystemModel
from .protocols import NodePartition, Protocol, protocol_update, select_node
from .quantization import QuantizerParams, quantize, saturation_check


class SimulationError(RuntimeError):
    """Base class for run-time failures; carries the hybrid time ``(t, j)``."""

    def __init__(self, msg: str, t: float | None = None, j: int | None = None):
        self.t, self.j = t, j
        where = "" if t is None else f" at (t={t:.9g}, j={j})"
        super().__init__(msg + where)


class IntegrationDiverged(SimulationError):
    pass


class ZenoError(SimulationError):
    pass


class PreconditionError(SimulationError):
    pass


class EventKind(str, enum.Enum):
    SAMPLE = "sample"
    UPDATE = "update"
    FLOW = "flow"


# ----------------------------------------------------------------------------
# State


@dataclass(frozen=True)
class HybridState:
    x: np.ndarray
    e: np.ndarray
    mu: np.ndarray
    m: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    kappa: np.ndarray
    b: np.ndarray
    triggered: np.ndarray

    def copy(self) -> "HybridState":
        return HybridState(*(np.array(getattr(self, f)) for f in _FIELDS))

    def with_(self, **kw) -> "HybridState":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in _FIELDS}

    def equal(self, other: "HybridState") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in _FIELDS)


_FIELDS = ("x", "e", "mu", "m", "delta", "tau", "kappa", "b", "triggered")


# ----------------------------------------------------------------------------
# Network configuration and timing policies


@dataclass(frozen=True)
class FixedInterval:
    h: float


@dataclass(frozen=True)
class UniformInterval:
    """Sampling interval drawn uniformly from ``[eps_min, masp]``."""


@dataclass(frozen=True)
class FixedDelay:
    d: float


@dataclass(frozen=True)
class UniformDelay:
    """Delay drawn uniformly from ``[0, min(mad, h)]``."""


@dataclass(frozen=True)
class NetworkConfig:
    masp: float
    mad: float
    eps_min: float
    node_dims: tuple[int, ...]
    protocol: Protocol
    quantizers: tuple[QuantizerParams, ...]
    omega: tuple[float, ...]
    etm: EtmParams
    sampling: FixedInterval | UniformInterval = UniformInterval()
    delay: FixedDelay | UniformDelay = UniformDelay()
    zoom_on_trigger_only: bool = False
    mu_min: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "node_dims", tuple(int(d) for d in self.node_dims))
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        object.__setattr__(self, "quantizers", tuple(self.quantizers))
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        for msg in self.problems():
            raise ValueError(msg)

    @property
    def partition(self) -> NodePartition:
        return NodePartition(self.node_dims)

    @property
    def ell(self) -> int:
        return len(self.node_dims)

    def problems(self) -> list[str]:
        out = []
        if not self.masp >= self.mad >= 0:
            out.append(f"need masp >= mad >= 0, got masp={self.masp}, mad={self.mad}")
        if not 0 < self.eps_min < self.masp:
            out.append(f"need 0 < eps_min < masp, got eps_min={self.eps_min}")
        if isinstance(self.sampling, FixedInterval) and not self.eps_min <= self.sampling.h <= self.masp:
            out.append(f"fixed sampling interval {self.sampling.h} outside [eps_min, masp]")
        if isinstance(self.delay, FixedDelay):
            if not 0 <= self.delay.d <= self.mad:
                out.append(f"fixed delay {self.delay.d} outside [0, mad]")
            if isinstance(self.sampling, FixedInterval) and self.delay.d > self.sampling.h:
                out.append("fixed delay exceeds the fixed sampling interval")
            if self.delay.d > self.eps_min and isinstance(self.sampling, UniformInterval):
                out.append("fixed delay must not exceed eps_min under random sampling")
        if len(self.quantizers) != self.ell:
            out.append(f"{len(self.quantizers)} quantizers for {self.ell} nodes")
        if len(self.omega) != self.ell:
            out.append(f"{len(self.omega)} zoom factors for {self.ell} nodes")
        if any(not 0 < w <= 1 for w in self.omega):
            out.append(f"zoom factors must lie in (0, 1], got {self.omega}")
        if self.mu_min < 0:
            out.append(f"mu_min must be nonnegative, got {self.mu_min}")
        return out


@dataclass(frozen=True)
class EventRecord:
    t: float
    j: int
    network: int
    kind: EventKind
    gamma_value: float = math.nan
    triggered: bool = False
    pre: HybridState | None = None
    post: HybridState | None = None
    node: int = 0
    saturated: bool = False


@dataclass
class Trace:
    records: list[EventRecord] = field(default_factory=list)
    t_steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eta_steps: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    e_norm_steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    samples: list[int] = field(default_factory=list)
    transmissions: list[int] = field(default_factory=list)
    updates: list[int] = field(default_factory=list)
    saturations: list[int] = field(default_factory=list)
    floor_hits: list[int] = field(default_factory=list)
    final: HybridState | None = None
    t_end: float = 0.0

    def jumps(self, network: int | None = None, kind: EventKind | None = None) -> list[EventRecord]:
        return [r for r in self.records if r.kind is not EventKind.FLOW
                and (network is None or r.network == network) and (kind is None or r.kind is kind)]

    def summary(self) -> dict:
        return {"networks": [{"samples": s, "triggered": k, "updates": u, "saturations": q}
                             for s, k, u, q in zip(self.samples, self.transmissions, self.updates,
                                                    self.saturations)],
                "t_end": self.t_end, "jumps": len(self.jumps())}


# ----------------------------------------------------------------------------
# Flow


def _rk4(model: SystemModel, t: float, delta0: np.ndarray, x: np.ndarray, e: np.ndarray, h: float):
    f = model.flow
    d1 = delta0
    k1x, k1e = f(d1, x, e)
    d2 = delta0 + 0.5 * h
    k2x, k2e = f(d2, x + 0.5 * h * k1x, e + 0.5 * h * k1e)
    k3x, k3e = f(d2, x + 0.5 * h * k2x, e + 0.5 * h * k2e)
    d4 = delta0 + h
    k4x, k4e = f(d4, x + h * k3x, e + h * k3e)
    x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    e_new = e + (h / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    return x_new, e_new


def _steps(dt: float, step: float) -> list[float]:
    n = int(dt / step)
    hs = [step] * n
    rest = dt - n * step
    if rest > step * 1e-9:
        hs.append(rest)
    elif n == 0:
        hs.append(dt)
    else:
        hs[-1] += rest
    return hs


def integrate_flow(state: HybridState, model: SystemModel, dt: float, step: float,
                   t0: float = 0.0, j: int = 0, on_step=None) -> HybridState:
    """Advance ``(x, e)`` by ``dt`` with fixed RK4 steps plus a final partial step.

    Clocks ``delta`` and ``tau`` move at unit rate; discrete fields stay put.
    ``on_step(t, x, e)`` is called after each step if given.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if dt == 0:
        return state
    x = np.array(state.x, dtype=float)
    e = np.array(state.e, dtype=float)
    delta = np.array(state.delta, dtype=float)
    hs = _steps(dt, step)
    elapsed = 0.0
    for k, h in enumerate(hs):
        x, e = _rk4(model, t0 + elapsed, delta + elapsed, x, e, h)
        # index-based clock avoids drift from summing many small steps
        elapsed = dt if k == len(hs) - 1 else (k + 1) * step
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(e))):
            raise IntegrationDiverged("non-finite state during flow", t0 + elapsed, j)
        if on_step is not None:
            on_step(t0 + elapsed, x, e)
    return state.with_(x=x, e=e, delta=state.delta + dt, tau=state.tau + dt)


# ----------------------------------------------------------------------------
# Jumps


def _mu_slice(configs: Sequence[NetworkConfig], i: int) -> slice:
    start = sum(c.ell for c in configs[:i])
    return slice(start, start + configs[i].ell)


def _e_slice(configs: Sequence[NetworkConfig], i: int) -> slice:
    start = sum(c.partition.size for c in configs[:i])
    return slice(start, start + configs[i].partition.size)


def sampling_jump(state: HybridState, i: int, model: SystemModel, configs: Sequence[NetworkConfig],
                  t: float = 0.0, j: int = 0, check_window: bool = True):
    """Sampling jump of network ``i``.

    Returns ``(new_state, gamma, node, saturated)``; ``node`` is the granted
    node (1-based) when the sample is transmitted and 0 otherwise.
    """
    cfg = configs[i]
    if state.b[i] != 0:
        raise PreconditionError(f"sampling jump of network {i} with b = 1", t, j)
    tol = 1e-9 * max(1.0, cfg.masp)
    if check_window and not cfg.eps_min - tol <= state.tau[i] <= cfg.masp + tol:
        raise PreconditionError(
            f"sampling of network {i} at tau = {state.tau[i]:.9g} outside [{cfg.eps_min}, {cfg.masp}]", t, j)
    es, ms = _e_slice(configs, i), _mu_slice(configs, i)
    part = cfg.partition
    e_i, mu_i, m_i = state.e[es], state.mu[ms], state.m[es]
    z_i = model.z_of(state.delta, state.x, state.e)[i]
    kappa = int(state.kappa[i])

    gamma = gamma_fn(z_i, e_i, mu_i, m_i, kappa, 0, cfg.etm)
    fire = gamma >= 0.0
    blocks = part.blocks(z_i)
    saturated = not saturation_check(list(cfg.quantizers), mu_i, blocks)

    m, kap, trig, node = state.m, state.kappa, state.triggered.copy(), 0
    trig[i] = int(fire)
    if fire:
        eps_q = np.concatenate([quantize(q, float(mu), z) - z
                                for q, mu, z in zip(cfg.quantizers, mu_i, blocks)])
        h = protocol_update(cfg.protocol, kappa, e_i, eps_q, part)
        m = state.m.copy()
        m[es] = h - e_i
        kap = state.kappa.copy()
        kap[i] += 1
        node = select_node(cfg.protocol, kappa, e_i, part)
    b = state.b.copy()
    b[i] = 1
    tau = state.tau.copy()
    tau[i] = 0.0
    return state.with_(m=m, kappa=kap, b=b, tau=tau, triggered=trig), float(gamma), node, saturated


def update_jump(state: HybridState, i: int, configs: Sequence[NetworkConfig],
                t: float = 0.0, j: int = 0):
    """Update jump of network ``i``; returns ``(new_state, floor_hit)``."""
    cfg = configs[i]
    if state.b[i] != 1:
        raise PreconditionError(f"update jump of network {i} with b = 0", t, j)
    es, ms = _e_slice(configs, i), _mu_slice(configs, i)
    fire = bool(state.triggered[i])
    e = state.e.copy()
    if fire:
        e[es] = state.e[es] + state.m[es]
    mu = state.mu.copy()
    floor_hit = False
    if fire or not cfg.zoom_on_trigger_only:
        zoomed = state.mu[ms] * np.asarray(cfg.omega)
        if cfg.mu_min > 0:
            floor_hit = bool(np.any(zoomed < cfg.mu_min))
            zoomed = np.maximum(zoomed, cfg.mu_min)
        if np.any(zoomed <= 0):
            raise SimulationError(f"zoom parameter of network {i} underflowed to 0; set mu_min", t, j)
        mu[ms] = zoomed
    m = state.m.copy()
    m[es] = -e[es]
    b = state.b.copy()
    b[i] = 0
    return state.with_(e=e, mu=mu, m=m, b=b), floor_hit


# ----------------------------------------------------------------------------
# Initial state


def initial_mu(model: SystemModel, configs: Sequence[NetworkConfig], x0, e0, safety: float = 1.1,
               floor: float = 1e-6) -> np.ndarray:
    delta = np.zeros(len(configs))
    zs = model.z_of(delta, x0, e0)
    out = []
    for cfg, z in zip(configs, zs):
        for q, blk in zip(cfg.quantizers, cfg.partition.blocks(z)):
            mu = safety * max(float(np.linalg.norm(blk)) / q.range, floor)
            out.append(max(mu, cfg.mu_min))
    return np.array(out)


def initial_state(model: SystemModel, configs: Sequence[NetworkConfig]) -> HybridState:
    if len(configs) != model.n_networks:
        raise ValueError(f"model has {model.n_networks} networks, config has {len(configs)}")
    for i, (cfg, part) in enumerate(zip(configs, model.partitions)):
        if cfg.partition != part:
            raise ValueError(f"network {i}: node dims {cfg.node_dims} differ from model {part.dims}")
    x0 = np.array(model.x0, dtype=float)
    e0 = np.zeros(model.n_e) if model.e0 is None else np.array(model.e0, dtype=float)
    n = len(configs)
    return HybridState(x=x0, e=e0, mu=initial_mu(model, configs, x0, e0), m=-e0.copy(),
                       delta=np.zeros(n), tau=np.zeros(n), kappa=np.zeros(n, dtype=np.int64),
                       b=np.zeros(n, dtype=np.int64), triggered=np.zeros(n, dtype=np.int64))


# ----------------------------------------------------------------------------
# Scheduler


class _Clock:
    """Per-network random timing; draws do not depend on the state."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg, self.rng = cfg, rng

    def interval(self) -> float:
        c = self.cfg
        if isinstance(c.sampling, FixedInterval):
            return c.sampling.h
        return float(self.rng.uniform(c.eps_min, c.masp))

    def delay(self, h: float) -> float:
        c = self.cfg
        if isinstance(c.delay, FixedDelay):
            return min(c.delay.d, h)
        return float(self.rng.uniform(0.0, min(c.mad, h)))


def run(model: SystemModel, configs: Sequence[NetworkConfig], t_end: float, step: float = 1e-4,
        seed: int = 0, record_every: int = 0, keep_snapshots: bool = True,
        state: HybridState | None = None) -> Trace:
    """Simulate on ``[0, t_end]``.

    ``record_every`` adds a FLOW record every that many integrator steps
    (0 disables them). Per-step ``|eta|`` and ``|e|`` are always kept.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n = len(configs)
    state = initial_state(model, configs) if state is None else state
    seeds = np.random.SeedSequence(seed).spawn(n)
    clocks = [_Clock(c, np.random.default_rng(s)) for c, s in zip(configs, seeds)]

    # first sampling: tau runs from 0, so the first interval is drawn like any other
    h_cur = [clk.interval() for clk in clocks]
    last_sample = [0.0] * n
    next_t = [h_cur[i] for i in range(n)]

    trace = Trace(samples=[0] * n, transmissions=[0] * n, updates=[0] * n,
                  saturations=[0] * n, floor_hits=[0] * n)
    ts, etas, enorms = [0.0], [model.eta(state.x).copy()], [float(np.linalg.norm(state.e))]
    counter = [0]
    t, j = 0.0, 0
    flow_start = [state, 0.0]

    def on_step(tt, x, e):
        ts.append(tt)
        etas.append(model.eta(x).copy())
        enorms.append(math.sqrt(float(e @ e)))
        counter[0] += 1
        if record_every and counter[0] % record_every == 0:
            snap = None
            if keep_snapshots:
                s0, t0 = flow_start
                el = tt - t0
                snap = s0.with_(x=x.copy(), e=e.copy(), delta=s0.delta + el, tau=s0.tau + el)
            trace.records.append(EventRecord(tt, j, -1, EventKind.FLOW, post=snap))

    prev_sample_t = [-math.inf] * n
    while True:
        # global order: time, then samplings before updates, then network index
        i = min(range(n), key=lambda k: (next_t[k], int(state.b[k]), k))
        t_next = next_t[i]
        flow_start[:] = [state, t]
        if t_next > t_end:
            state = integrate_flow(state, model, t_end - t, step, t, j, on_step)
            t = t_end
            break
        state = integrate_flow(state, model, t_next - t, step, t, j, on_step)
        t = t_next
        # tau accumulates float round-off; pin it to the scheduled value
        tau = state.tau.copy()
        tau[i] = t - last_sample[i]
        state = state.with_(tau=tau)
        pre = state
        if state.b[i] == 0:
            cfg = configs[i]
            if t - prev_sample_t[i] < cfg.eps_min * 1e-6:
                raise ZenoError(f"network {i} sampled twice within {cfg.eps_min * 1e-6:g}", t, j)
            state, gamma, node, sat = sampling_jump(state, i, model, configs, t, j)
            prev_sample_t[i] = t
            last_sample[i] = t
            trace.samples[i] += 1
            trace.transmissions[i] += int(node > 0)
            trace.saturations[i] += int(sat)
            j += 1
            trace.records.append(EventRecord(t, j, i, EventKind.SAMPLE, gamma, node > 0,
                                             pre if keep_snapshots else None,
                                             state if keep_snapshots else None, node, sat))
            next_t[i] = t + clocks[i].delay(h_cur[i])
        else:
            state, hit = update_jump(state, i, configs, t, j)
            trace.updates[i] += 1
            trace.floor_hits[i] += int(hit)
            j += 1
            trace.records.append(EventRecord(t, j, i, EventKind.UPDATE, math.nan, bool(state.triggered[i]),
                                             pre if keep_snapshots else None,
                                             state if keep_snapshots else None))
            h_cur[i] = clocks[i].interval()
            next_t[i] = last_sample[i] + h_cur[i]

    trace.t_steps = np.array(ts)
    trace.eta_steps = np.array(etas)
    trace.e_norm_steps = np.array(enorms)
    trace.final = state
    trace.t_end = t_end
    return trace
