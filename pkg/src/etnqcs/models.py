"""System models and certificate functions.

A ``SystemModel`` gives the closed-loop flow in error coordinates: the
state ``x`` (tracking error, controller and reference states) and the
network-induced error ``e = z_hat - z``, stored network by network in the
node order used by the scheduling protocols. Between jumps the received
values are held, so ``de/dt = -dz/dt``.

The shipped robot-arm instance has two networks, one per arm, each with
three nodes: ``(q_p^{i1}, q_r^{i1})``, ``(q_p^{i2}, q_r^{i2})`` and
``(u_c^i, u_f^i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .protocols import NodePartition, Protocol, rr_weights

FlowFn = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class CertificateSet:
    """Per-network monitoring functions plus the constants they were built with.

    ``w[i](e, mu, m, kappa, b)`` is the jump certificate of network ``i``;
    ``etm_w[i]`` and ``phi_state[i](z_i)`` feed the trigger rule; ``V(x)``
    measures the plant-side state.
    """

    w: tuple[Callable, ...]
    etm_w: tuple[Callable, ...]
    phi_state: tuple[Callable, ...]
    V: Callable[[np.ndarray], float]
    lam: tuple[float, ...]
    omega: tuple[float, ...]
    zoom: tuple[np.ndarray, ...]
    constants: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SystemModel:
    name: str
    n_x: int
    partitions: tuple[NodePartition, ...]
    flow: FlowFn
    z_of: Callable[[np.ndarray, np.ndarray, np.ndarray], list[np.ndarray]]
    x0: np.ndarray
    e0: np.ndarray | None = None
    eta_index: np.ndarray | None = None
    certificates: CertificateSet | None = None
    params: dict = field(default_factory=dict)
    eta_groups: tuple[slice, ...] | None = None

    @property
    def n_networks(self) -> int:
        return len(self.partitions)

    @property
    def n_e(self) -> int:
        return sum(p.size for p in self.partitions)

    @property
    def e_slices(self) -> list[slice]:
        out, start = [], 0
        for p in self.partitions:
            out.append(slice(start, start + p.size))
            start += p.size
        return out

    def flow_x(self, delta, x, e) -> np.ndarray:
        return self.flow(delta, x, e)[0]

    def flow_e(self, delta, x, e) -> np.ndarray:
        return self.flow(delta, x, e)[1]

    def eta(self, x) -> np.ndarray:
        x = np.asarray(x)
        return x if self.eta_index is None else x[self.eta_index]

    def eta_norms(self, eta) -> list[float]:
        """Per-network ``|eta_i|`` from a tracking-error vector."""
        groups = self.eta_groups or (slice(None),)
        return [float(np.linalg.norm(eta[g])) for g in groups]


# --------------------------------------------------------------------------
# Two coupled single-link robot arms

ROBOT_DEFAULTS = {
    "a": (9.81 * 0.2, 9.81 * 0.3),
    "c": (2.0, 4.0),
    "b": ((-0.2, -0.2), (0.2, 0.2)),
    "eta0": (3.0, 0.0, -5.0, 0.0),
    "xr0": None,
    "uf_amp": 5.0,
    "uf_freq": 5.0,
}

# quadratic-form coefficients of V, per arm
V_COEFFS = ((8.0, 12.0, 6.0), (5.0, 7.0, 9.0))


def robot_controller(a: float, c: float, p1: float, r1: float, p2: float, r2: float) -> float:
    """Feedback torque computed from held measurements."""
    return (a * (math.sin(p1) - math.sin(r1)) - (p1 - r1) - (p2 - r2)) / c


def robot_arm_model(params: dict | None = None, certificates: "CertificateSet | None" = None) -> SystemModel:
    p = {**ROBOT_DEFAULTS, **(params or {})}
    a1, a2 = (float(v) for v in p["a"])
    c1, c2 = (float(v) for v in p["c"])
    if min(a1, a2) <= 0 or min(c1, c2) <= 0:
        raise ModelError(f"a_i and c_i must be positive, got a={p['a']}, c={p['c']}")
    (b11, b12), (b21, b22) = ((float(u) for u in row) for row in p["b"])
    amp, freq = float(p["uf_amp"]), float(p["uf_freq"])
    sin, cos = math.sin, math.cos

    def flow(delta, x, e):
        n11, n12, n21, n22, r11, r12, r21, r22 = x.tolist()
        ep11, er11, ep12, er12, ec1, ef1, ep21, er21, ep22, er22, ec2, ef2 = e.tolist()
        d1, d2 = delta[0], delta[1]
        p11, p12, p21, p22 = n11 + r11, n12 + r12, n21 + r21, n22 + r22
        uf1, uf2 = amp * sin(freq * d1), amp * sin(freq * d2)
        uc1 = robot_controller(a1, c1, p11 + ep11, r11 + er11, p12 + ep12, r12 + er12)
        uc2 = robot_controller(a2, c2, p21 + ep21, r21 + er21, p22 + ep22, r22 + er22)
        # plant couplings act on the true states
        dp12 = -a1 * sin(p11) + b11 * (p11 - p21) + b12 * (p12 - p22) + c1 * (uc1 + ec1 + uf1 + ef1)
        dp22 = -a2 * sin(p21) + b21 * (p11 - p21) + b22 * (p12 - p22) + c2 * (uc2 + ec2 + uf2 + ef2)
        dr12 = -a1 * sin(r11) + b11 * (r11 - r21) + b12 * (r12 - r22) + c1 * uf1
        dr22 = -a2 * sin(r21) + b21 * (r11 - r21) + b22 * (r12 - r22) + c2 * uf2
        dx = np.array([n12, dp12 - dr12, n22, dp22 - dr22, r12, dr12, r22, dr22])
        de = np.array([-p12, -r12, -dp12, -dr12, 0.0, -amp * freq * cos(freq * d1),
                       -p22, -r22, -dp22, -dr22, 0.0, -amp * freq * cos(freq * d2)])
        return dx, de

    def z_of(delta, x, e):
        n11, n12, n21, n22, r11, r12, r21, r22 = np.asarray(x, dtype=float).tolist()
        e = np.asarray(e, dtype=float)
        out = []
        for i, (a, c, n1, n2, r1, r2) in enumerate(((a1, c1, n11, n12, r11, r12), (a2, c2, n21, n22, r21, r22))):
            ep1, er1, ep2, er2 = e[6 * i:6 * i + 4]
            q1, q2 = n1 + r1, n2 + r2
            uc = robot_controller(a, c, q1 + ep1, r1 + er1, q2 + ep2, r2 + er2)
            out.append(np.array([q1, r1, q2, r2, uc, amp * sin(freq * delta[i])]))
        return out

    xr0 = periodic_reference_start((a1, a2), (c1, c2), amp, freq) if p["xr0"] is None else p["xr0"]
    xr0 = np.asarray(xr0, dtype=float)
    if "xp0" in p:
        eta0 = np.asarray(p["xp0"], dtype=float) - xr0
    else:
        eta0 = np.asarray(p["eta0"], dtype=float)
    x0 = np.concatenate([eta0, xr0])
    part = NodePartition((2, 2, 2))
    return SystemModel("robot_arm", 8, (part, part), flow, z_of, x0, np.zeros(12),
                       eta_index=np.arange(4), certificates=certificates, eta_groups=(slice(0, 2), slice(2, 4)),
                       params={k: p[k] for k in ("a", "b", "c")})


def periodic_reference_start(a, c, amp: float = 5.0, freq: float = 5.0) -> tuple[float, ...]:
    """Start each reference on the forced periodic orbit of its linearisation.

    ``r'' + a r = c amp sin(freq t)`` has the periodic solution
    ``r = c amp / (a - freq^2) sin(freq t)``; starting there keeps the
    undamped reference free of a superimposed natural oscillation.
    """
    out = []
    for ai, ci in zip(a, c):
        out += [0.0, freq * ci * amp / (ai - freq * freq)]
    return tuple(out)


def robot_D(a: float, c: float) -> float:
    return math.sqrt(3.0) * max(1.0 + a, c)


def robot_V(x) -> float:
    x = np.asarray(x, dtype=float)
    total = 0.0
    for i, (f1, f2, f3) in enumerate(V_COEFFS):
        n1, n2 = x[2 * i], x[2 * i + 1]
        total += f1 * n1 * n1 + f2 * n1 * n2 + f3 * n2 * n2
    return float(total)


def robot_V_lower(x) -> float:
    """Eigenvalue lower bound ``sum_i lambda_min(P_i) |eta_i|^2`` for ``robot_V``."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for i, (f1, f2, f3) in enumerate(V_COEFFS):
        P = np.array([[f1, f2 / 2], [f2 / 2, f3]])
        total += np.linalg.eigvalsh(P)[0] * float(x[2 * i] ** 2 + x[2 * i + 1] ** 2)
    return total


def robot_e_a(e_i) -> np.ndarray:
    """``(e_eta, e_c)`` from one arm's node-ordered error block."""
    ep1, er1, ep2, er2, ec, _ = np.asarray(e_i, dtype=float)
    return np.array([ep1 - er1, ep2 - er2, ec])


def robot_etm_w(e_i, mu_i, m_i=None, kappa_i=0, b_i=0) -> float:
    ep1, er1, ep2, er2, _, _ = np.asarray(e_i, dtype=float)
    mu_i = np.asarray(mu_i, dtype=float)
    return math.sqrt((ep1 - er1) ** 2 + (ep2 - er2) ** 2 + er1 ** 2 + er2 ** 2 + float(mu_i @ mu_i))


def robot_phi_state(z_i) -> float:
    q1, r1, q2, r2 = np.asarray(z_i, dtype=float)[:4]
    return (q1 - r1) ** 2 + (q2 - r2) ** 2


def protocol_lambda(ell: int, omega: float, ranges, err_bounds, zoom) -> float:
    return max(math.sqrt((ell - 1) / ell),
               omega * max(ranges) * max(err_bounds) + max(zoom))


def make_jump_certificate(protocol, partition: NodePartition, omega: float, zoom) -> Callable:
    """Jump certificate for one network.

    With ``b = 0`` it is ``omega * N(e) + |mu|``; with ``b = 1`` it measures
    the pending update, ``omega * N(e + m) + |Omega mu|``. ``N`` is the
    Euclidean norm for TOD and the Round-Robin weighted norm
    ``sqrt(sum_l s_l(kappa) |e_l|^2)`` for RR, where ``s_l`` counts the
    transmissions until node ``l`` is served.
    """
    protocol = Protocol.parse(protocol)
    zoom = np.asarray(zoom, dtype=float)
    slices = partition.slices
    ell = partition.ell

    def norm(v, kappa):
        if protocol is Protocol.TRY_ONCE_DISCARD:
            return float(np.linalg.norm(v))
        s = rr_weights(kappa, ell)
        return math.sqrt(sum(float(s[k]) * float(v[sl] @ v[sl]) for k, sl in enumerate(slices)))

    def W(e, mu, m, kappa, b):
        e = np.asarray(e, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if b:
            return omega * norm(e + np.asarray(m, dtype=float), kappa) + float(np.linalg.norm(zoom * mu))
        return omega * norm(e, kappa) + float(np.linalg.norm(mu))

    return W


def robot_arm_certificates(protocol, params: dict | None = None) -> CertificateSet:
    """Certificates and constants for the two-arm example.

    ``params`` may carry ``omega`` (per arm), per-node quantizer ``range``,
    ``err_bound`` and ``zoom`` lists, and the arm constants ``a`` and ``c``.
    """
    p = {**ROBOT_DEFAULTS, **(params or {})}
    protocol = Protocol.parse(protocol)
    part = NodePartition((2, 2, 2))
    ell = part.ell
    omegas = tuple(float(w) for w in p.get("omega", (0.002, 0.002)))
    ranges = p.get("range", ((100.0,) * 3,) * 2)
    errs = p.get("err_bound", ((0.8,) * 3,) * 2)
    zooms = p.get("zoom", ((0.6,) * 3,) * 2)
    lams, ws = [], []
    for i in range(2):
        Om = np.asarray(zooms[i], dtype=float)
        upper = (1.0 - Om.max()) / max(errs[i])
        if not 0.0 < omegas[i] < upper:
            raise ModelError(f"omega_{i + 1} = {omegas[i]} must lie in (0, {upper:.6g})")
        lams.append(protocol_lambda(ell, omegas[i], ranges[i], errs[i], Om))
        ws.append(make_jump_certificate(protocol, part, omegas[i], Om))

    M = math.sqrt(ell) if protocol is Protocol.ROUND_ROBIN else 1.0
    consts = {"M": M, "D": [], "L0": [], "L1": []}
    for i in range(2):
        D = robot_D(float(p["a"][i]), float(p["c"][i]))
        consts["D"].append(D)
        consts["L0"].append(M * D)
        consts["L1"].append(M * M * D / lams[i])
    return CertificateSet(w=tuple(ws), etm_w=(robot_etm_w, robot_etm_w),
                          phi_state=(robot_phi_state, robot_phi_state), V=robot_V,
                          lam=tuple(lams), omega=omegas,
                          zoom=tuple(np.asarray(z, dtype=float) for z in zooms), constants=consts)


# --------------------------------------------------------------------------
# Small models for tests and sanity checks

def _plain_etm_w(e, mu, m=None, kappa=0, b=0) -> float:
    return math.sqrt(float(np.dot(e, e)) + float(np.dot(mu, mu)))


def _plain_phi_state(z) -> float:
    return float(np.dot(z, z))


def generic_certificates(partitions: Sequence[NodePartition], protocol=Protocol.TRY_ONCE_DISCARD,
                         omega: float = 0.1, zoom: float = 0.6, lam: float = 0.9) -> CertificateSet:
    """Plain certificates for test models: ``W = |(e, mu)|`` in the trigger rule, ``V = |x|^2``."""
    n = len(partitions)
    return CertificateSet(
        w=tuple(make_jump_certificate(protocol, p, omega, np.full(p.ell, zoom)) for p in partitions),
        etm_w=(_plain_etm_w,) * n, phi_state=(_plain_phi_state,) * n,
        V=lambda x: float(np.dot(x, x)), lam=(lam,) * n, omega=(omega,) * n,
        zoom=tuple(np.full(p.ell, zoom) for p in partitions))


def zero_dynamics_model(node_dims: Sequence[Sequence[int]] = ((1,),), x0=None) -> SystemModel:
    """``f = 0``, ``g = 0``; each network transmits a constant slice of ``x``."""
    parts = tuple(NodePartition(tuple(d)) for d in node_dims)
    n = sum(p.size for p in parts)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ModelError(f"x0 must have length {n}")
    bounds = np.cumsum([0] + [p.size for p in parts])
    groups = tuple(slice(int(bounds[i]), int(bounds[i + 1])) for i in range(len(parts)))

    def flow(delta, x, e):
        return np.zeros_like(x), np.zeros_like(e)

    def z_of(delta, x, e):
        return [np.asarray(x[g], dtype=float) for g in groups]

    return SystemModel("zero_dynamics", n, parts, flow, z_of, x0, np.zeros(n),
                       eta_index=np.arange(n), certificates=generic_certificates(parts), eta_groups=groups)


def scalar_decay_model(x0: float = 1.0) -> SystemModel:
    """``dx/dt = -x`` sent over one single-node network."""

    def flow(delta, x, e):
        return -x, x.copy()

    def z_of(delta, x, e):
        return [np.asarray(x, dtype=float).copy()]

    part = NodePartition((1,))
    return SystemModel("scalar_decay", 1, (part,), flow, z_of, np.array([float(x0)]), np.zeros(1),
                       eta_index=np.arange(1), certificates=generic_certificates((part,)))


BUILTIN_MODELS = ("robot_arm_rr", "robot_arm_tod", "zero_dynamics", "scalar_decay")

_CUSTOM: dict[str, Callable[[dict], SystemModel]] = {}


def register_model(name: str, factory: Callable[[dict], SystemModel]) -> None:
    """Make ``factory(params)`` available to ``build_model`` and configs under ``name``."""
    if name in BUILTIN_MODELS:
        raise ModelError(f"{name!r} is a built-in model")
    _CUSTOM[name] = factory


def model_names() -> tuple[str, ...]:
    return BUILTIN_MODELS + tuple(sorted(_CUSTOM))


def build_model(name: str, params: dict | None = None) -> SystemModel:
    params = dict(params or {})
    if name in ("robot_arm_rr", "robot_arm_tod"):
        protocol = Protocol.ROUND_ROBIN if name.endswith("rr") else Protocol.TRY_ONCE_DISCARD
        certs = robot_arm_certificates(protocol, params)
        return robot_arm_model(params, certs)
    if name == "zero_dynamics":
        return zero_dynamics_model(params.get("node_dims", ((1,),)), params.get("x0"))
    if name == "scalar_decay":
        return scalar_decay_model(params.get("x0", 1.0))
    if name in _CUSTOM:
        return _CUSTOM[name](params)
    raise ModelError(f"unknown model {name!r}; available: {', '.join(model_names())}")
