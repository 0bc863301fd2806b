"""Simulation configs: loading from TOML/JSON, validation, and assembly.

A config names a built-in model and lists one ``[[network]]`` table per
network. Errors are reported as ``ConfigError`` with the dotted path of the
offending field, e.g. ``network[1].etm.rho``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


from .design import PhiParams
from .etm import EtmError, EtmParams
from .hybrid import FixedDelay, FixedInterval, NetworkConfig, UniformDelay, UniformInterval
from .models import ModelError, SystemModel, build_model, model_names
from .protocols import Protocol
from .quantization import QuantizerError, QuantizerParams


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}" if path else msg)


@dataclass(frozen=True)
class DesignSpec:
    """Timer-ODE constants for one network (``b = 0`` and ``b = 1`` sides)."""

    p0: PhiParams
    p1: PhiParams
    lambda_bar: float | None = None


@dataclass
class SimConfig:
    model: str
    networks: list[NetworkConfig]
    t_end: float
    step: float = 1e-4
    seed: int = 0
    record_every: int = 100
    model_params: dict = field(default_factory=dict)
    out_dir: str = "out"
    monitor: bool = True
    design: list[DesignSpec | None] = field(default_factory=list)
    name: str = ""

    def build_model(self) -> SystemModel:
        return build_model(self.model, self.model_params)

    def with_rho(self, rho: float) -> "SimConfig":
        nets = [_replace_etm(n, n.etm.with_rho(rho)) for n in self.networks]
        return SimConfig(self.model, nets, self.t_end, self.step, self.seed, self.record_every,
                         self.model_params, self.out_dir, self.monitor, self.design, self.name)


def _replace_etm(net: NetworkConfig, etm: EtmParams) -> NetworkConfig:
    from dataclasses import replace
    return replace(net, etm=etm)


# ----------------------------------------------------------------------------
# Loading


def read_raw(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text.decode())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None


def load_config(path: str | Path, overrides: dict | None = None) -> SimConfig:
    raw = read_raw(path)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    raw.setdefault("name", Path(path).stem)
    return parse_config(raw)


def _get(d: dict, key: str, path: str, kind=float, default=..., check=None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}".lstrip("."), "missing required field")
        return default
    v = d[key]
    try:
        if kind is float:
            if isinstance(v, bool):
                raise TypeError
            v = float(v)
            if not math.isfinite(v):
                raise ValueError
        elif kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise TypeError
            v = int(v)
        elif kind is bool:
            if not isinstance(v, bool):
                raise TypeError
        elif kind is str:
            if not isinstance(v, str):
                raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}".lstrip("."), f"expected {kind.__name__}, got {v!r}") from None
    if check is not None:
        msg = check(v)
        if msg:
            raise ConfigError(f"{path}.{key}".lstrip("."), msg)
    return v


def _positive(v):
    return None if v > 0 else f"must be positive, got {v}"


def _nonneg(v):
    return None if v >= 0 else f"must be nonnegative, got {v}"


def _per_node(value, ell: int, path: str) -> list:
    if isinstance(value, list):
        if len(value) != ell:
            raise ConfigError(path, f"expected {ell} entries, got {len(value)}")
        return value
    return [value] * ell


def _quantizers(net: dict, ell: int, path: str) -> list[QuantizerParams]:
    q = net.get("quantizer")
    if q is None:
        raise ConfigError(f"{path}.quantizer", "missing required field")
    nodes = _per_node(q, ell, f"{path}.quantizer")
    out = []
    for k, node in enumerate(nodes):
        p = f"{path}.quantizer[{k}]"
        if not isinstance(node, dict):
            raise ConfigError(p, "expected a table with range and err_bound")
        try:
            out.append(QuantizerParams(_get(node, "range", p), _get(node, "err_bound", p),
                                       _get(node, "dead_zone", p, default=None)))
        except QuantizerError as exc:
            raise ConfigError(p, str(exc)) from None
    return out


def _timing(net: dict, key: str, path: str):
    spec = net.get(key, {"kind": "uniform"})
    p = f"{path}.{key}"
    if not isinstance(spec, dict):
        raise ConfigError(p, "expected a table with a 'kind' field")
    kind = _get(spec, "kind", p, str)
    if kind == "uniform":
        return UniformInterval() if key == "sampling" else UniformDelay()
    if kind == "fixed":
        if key == "sampling":
            return FixedInterval(_get(spec, "h", p, check=_positive))
        return FixedDelay(_get(spec, "d", p, check=_nonneg))
    raise ConfigError(f"{p}.kind", f"expected 'fixed' or 'uniform', got {kind!r}")


def _certificate_params(raw_nets: list[dict], quants: list[list[QuantizerParams]], zooms) -> dict:
    omegas = []
    for k, net in enumerate(raw_nets):
        omegas.append(_get(net, "omega", f"network[{k}]", check=_positive))
    return {"omega": tuple(omegas),
            "range": tuple(tuple(q.range for q in qs) for qs in quants),
            "err_bound": tuple(tuple(q.err_bound for q in qs) for qs in quants),
            "zoom": tuple(tuple(z) for z in zooms)}


def parse_config(raw: dict) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a table")
    model_name = _get(raw, "model", "", str)
    if model_name not in model_names():
        raise ConfigError("model", f"unknown model {model_name!r}; choose from {', '.join(model_names())}")
    t_end = _get(raw, "t_end", "", check=_positive)
    step = _get(raw, "step", "", default=1e-4, check=_positive)
    seed = _get(raw, "seed", "", int, default=0)
    record_every = _get(raw, "record_every", "", int, default=100, check=_nonneg)
    monitor = _get(raw, "monitor", "", bool, default=True)
    out_dir = _get(raw, "out_dir", "", str, default="out")
    model_params = dict(raw.get("model_params", {}))

    raw_nets = raw.get("network")
    if not isinstance(raw_nets, list) or not raw_nets:
        raise ConfigError("network", "need at least one [[network]] table")

    # first pass: everything the model's certificates depend on
    dims, quants, zooms = [], [], []
    for k, net in enumerate(raw_nets):
        path = f"network[{k}]"
        nd = net.get("node_dims")
        if not isinstance(nd, list) or not nd or any(not isinstance(d, int) or d < 1 for d in nd):
            raise ConfigError(f"{path}.node_dims", f"expected a list of positive integers, got {nd!r}")
        dims.append(tuple(nd))
        quants.append(_quantizers(net, len(nd), path))
        zoom = [float(z) for z in _per_node(net.get("zoom", 0.6), len(nd), f"{path}.zoom")]
        if any(not 0 < z <= 1 for z in zoom):
            raise ConfigError(f"{path}.zoom", f"zoom factors must lie in (0, 1], got {zoom}")
        zooms.append(zoom)

    if model_name.startswith("robot_arm"):
        model_params = {**_certificate_params(raw_nets, quants, zooms), **model_params}
        if len(raw_nets) != 2:
            raise ConfigError("network", f"robot-arm models need 2 networks, got {len(raw_nets)}")
    try:
        model = build_model(model_name, model_params)
    except ModelError as exc:
        raise ConfigError("model_params", str(exc)) from None
    if len(raw_nets) != model.n_networks:
        raise ConfigError("network", f"model {model_name} has {model.n_networks} networks, got {len(raw_nets)}")

    networks, designs = [], []
    certs = model.certificates
    for k, net in enumerate(raw_nets):
        path = f"network[{k}]"
        if model.partitions[k].dims != dims[k]:
            raise ConfigError(f"{path}.node_dims", f"model expects {model.partitions[k].dims}, got {dims[k]}")
        protocol_raw = _get(net, "protocol", path, str)
        try:
            protocol = Protocol.parse(protocol_raw)
        except ValueError as exc:
            raise ConfigError(f"{path}.protocol", str(exc)) from None
        etm = _etm(net.get("etm", {}), f"{path}.etm", certs, k)
        try:
            networks.append(NetworkConfig(
                masp=_get(net, "masp", path, check=_positive),
                mad=_get(net, "mad", path, check=_nonneg),
                eps_min=_get(net, "eps_min", path, check=_positive),
                node_dims=dims[k], protocol=protocol, quantizers=tuple(quants[k]), omega=tuple(zooms[k]),
                etm=etm, sampling=_timing(net, "sampling", path), delay=_timing(net, "delay", path),
                zoom_on_trigger_only=_get(net, "zoom_on_trigger_only", path, bool, default=False),
                mu_min=_get(net, "mu_min", path, default=0.0, check=_nonneg)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(path, str(exc)) from None
        designs.append(_design(net.get("design"), f"{path}.design"))

    eps = min(n.eps_min for n in networks)
    if step > eps / 20 * (1 + 1e-12):
        raise ConfigError("step", f"integrator step {step} exceeds min eps_min / 20 = {eps / 20:g}")
    return SimConfig(model_name, networks, t_end, step, seed, record_every, model_params, out_dir,
                     monitor, designs, str(raw.get("name", "")))


def _etm(raw: dict, path: str, certs, k: int) -> EtmParams:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    gamma0 = _get(raw, "gamma0", path, check=_positive)
    gamma1 = _get(raw, "gamma1", path, check=_positive)
    if "Lbar0" in raw and "rho_bar" in raw:
        raise ConfigError(path, "give either Lbar0 or rho_bar, not both")
    if "rho_bar" in raw:
        rb = _get(raw, "rho_bar", path, check=lambda v: None if 0 < v <= 1 else "must lie in (0, 1]")
        Lbar0 = 1.0 / rb - gamma0
    else:
        Lbar0 = _get(raw, "Lbar0", path)
    default_lam = certs.lam[k] if certs is not None else ...
    lam = _get(raw, "lambda", path, default=default_lam)
    allow = _get(raw, "allow_rho_above_bar", path, bool, default=False)
    if "rho" in raw and "rho_fraction" in raw:
        raise ConfigError(path, "give either rho or rho_fraction, not both")
    probe = EtmParams(0.0, lam, gamma0, gamma1, Lbar0, allow_rho_above_bar=True) if 0 <= lam < 1 else None
    if probe is None:
        raise ConfigError(f"{path}.lambda", f"must lie in [0, 1), got {lam}")
    if "rho_fraction" in raw:
        frac = _get(raw, "rho_fraction", path, check=lambda v: None if 0 <= v < 1 else "must lie in [0, 1)")
        rho = frac * probe.rho_bar
    else:
        rho = _get(raw, "rho", path, default=0.0, check=_nonneg)
    w_fn = certs.etm_w[k] if certs is not None else None
    phi_fn = certs.phi_state[k] if certs is not None else None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return EtmParams(rho, lam, gamma0, gamma1, Lbar0, w_fn, phi_fn, allow)
    except EtmError as exc:
        raise ConfigError(f"{path}.rho", str(exc)) from None


def _design(raw, path: str) -> DesignSpec | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    try:
        p0 = PhiParams(_get(raw, "L0", path), _get(raw, "gamma0", path),
                       _get(raw, "varrho0", path), _get(raw, "phi0_0", path))
        p1 = PhiParams(_get(raw, "L1", path), _get(raw, "gamma1", path),
                       _get(raw, "varrho1", path), _get(raw, "phi1_0", path))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    lb = _get(raw, "lambda_bar", path, default=None)
    return DesignSpec(p0, p1, lb)


def design_lambda_bar(cfg: SimConfig, k: int) -> float:
    spec = cfg.design[k] if k < len(cfg.design) else None
    if spec is not None and spec.lambda_bar is not None:
        return spec.lambda_bar
    return cfg.networks[k].etm.lambda_bar


def config_to_dict(cfg: SimConfig) -> dict:
    """Plain summary of a parsed config (for run metadata, not round-tripping)."""
    nets = []
    for n in cfg.networks:
        nets.append({"masp": n.masp, "mad": n.mad, "eps_min": n.eps_min, "node_dims": list(n.node_dims),
                     "protocol": n.protocol.value, "rho": n.etm.rho, "lambda": n.etm.lam,
                     "lambda_bar": n.etm.lambda_bar, "rho_bar": n.etm.rho_bar,
                     "gamma0": n.etm.gamma0, "gamma1": n.etm.gamma1, "Lbar0": n.etm.Lbar0,
                     "zoom": list(n.omega), "mu_min": n.mu_min,
                     "quantizer": [{"range": q.range, "err_bound": q.err_bound} for q in n.quantizers]})
    return {"name": cfg.name, "model": cfg.model, "t_end": cfg.t_end, "step": cfg.step, "seed": cfg.seed,
            "networks": nets}
