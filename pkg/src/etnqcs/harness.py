"""Experiment runners behind the command line: simulate, compare, design."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimConfig, config_to_dict, design_lambda_bar
from .design import DesignError, max_T_Delta
from .hybrid import EventKind, Trace, run
from .models import SystemModel
from .monitor import MonitorReport, check_trace_invariants, lyapunov_monitor

TRACE_HEADER = ["t", "j", "network", "kind", "gamma", "triggered", "norm_eta", "norm_e"]


@dataclass
class RunResult:
    config: SimConfig
    model: SystemModel
    trace: Trace
    monitor: MonitorReport | None = None
    invariant_problems: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        out = self.trace.summary()
        out["config"] = config_to_dict(self.config)
        out["floor_hits"] = list(self.trace.floor_hits)
        eta = np.array([self.model.eta_norms(v) for v in self.trace.eta_steps[-1:]])
        out["final_norm_eta"] = eta[0].tolist() if len(eta) else []
        out["max_norm_eta_late"] = max_eta_after(self.trace, 0.5)
        if self.monitor is not None:
            out["monitor"] = self.monitor.as_dict()
        out["invariant_problems"] = len(self.invariant_problems)
        return out


def simulate(cfg: SimConfig, monitor: bool | None = None) -> RunResult:
    model = cfg.build_model()
    trace = run(model, cfg.networks, cfg.t_end, cfg.step, cfg.seed, cfg.record_every)
    do_monitor = cfg.monitor if monitor is None else monitor
    report = None
    if do_monitor and model.certificates is not None:
        report = lyapunov_monitor(trace, model, cfg.networks, track_u=False)
    problems = check_trace_invariants(trace, cfg.networks, model)
    return RunResult(cfg, model, trace, report, problems)


def max_eta_after(trace: Trace, frac: float) -> float:
    t = trace.t_steps
    if t.size == 0:
        return 0.0
    sel = trace.eta_steps[t >= frac * trace.t_end]
    return float(np.linalg.norm(sel, axis=1).max()) if len(sel) else 0.0


# ----------------------------------------------------------------------------
# Artifacts


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def trace_csv(result: RunResult) -> str:
    model, trace = result.model, result.trace
    certs = model.certificates
    n = model.n_networks
    cert_cols = [] if certs is None else ["V"] + [f"W{i + 1}" for i in range(n)]
    es = model.e_slices
    ms, start = [], 0
    for p in model.partitions:
        ms.append(slice(start, start + p.ell))
        start += p.ell
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER + cert_cols) + "\n")
    for r in trace.records:
        s = r.post
        row = [r.t, r.j, r.network + 1, r.kind.value, r.gamma_value, r.triggered]
        if s is None:
            row += [math.nan, math.nan] + [math.nan] * len(cert_cols)
        else:
            row += [float(np.linalg.norm(model.eta(s.x))), float(np.linalg.norm(s.e))]
            if certs is not None:
                row.append(float(certs.V(s.x)))
                for i in range(n):
                    row.append(float(certs.w[i](s.e[es[i]], s.mu[ms[i]], s.m[es[i]], int(s.kappa[i]),
                                                int(s.b[i]))))
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def plot_csv(result: RunResult, stride: int | None = None) -> str:
    """``t`` against per-network ``|eta_i|`` and the total ``|eta|``."""
    model, trace = result.model, result.trace
    stride = max(1, result.config.record_every if stride is None else stride)
    groups = model.eta_groups or (slice(None),)
    cols = ["t"] + [f"norm_eta{i + 1}" for i in range(len(groups))] + ["norm_eta"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    idx = list(range(0, len(trace.t_steps), stride))
    if idx[-1] != len(trace.t_steps) - 1:
        idx.append(len(trace.t_steps) - 1)
    for k in idx:
        eta = trace.eta_steps[k]
        vals = [trace.t_steps[k]] + model.eta_norms(eta) + [float(np.linalg.norm(eta))]
        buf.write(",".join(repr(float(v)) for v in vals) + "\n")
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_artifacts(result: RunResult, out_dir: str | Path, prefix: str = "") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace": out / f"{prefix}trace.csv", "summary": out / f"{prefix}summary.json",
             "plot": out / f"{prefix}plot.csv"}
    paths["trace"].write_text(trace_csv(result))
    paths["summary"].write_text(dumps(result.summary()))
    paths["plot"].write_text(plot_csv(result))
    return paths


# ----------------------------------------------------------------------------
# Comparison


@dataclass
class ComparisonReport:
    ttc_count: list[int]
    etc_count: list[int]
    max_eta_late: float
    max_eta_late_ttc: float
    saturations: list[int]

    @property
    def reduction_ratio(self) -> list[float]:
        return [e / t if t else 1.0 for e, t in zip(self.etc_count, self.ttc_count)]

    def as_dict(self) -> dict:
        return {"networks": [{"ttc_count": t, "etc_count": e, "reduction_ratio": r, "saturations": s}
                             for t, e, r, s in zip(self.ttc_count, self.etc_count, self.reduction_ratio,
                                                   self.saturations)],
                "max_norm_eta_late": self.max_eta_late, "max_norm_eta_late_ttc": self.max_eta_late_ttc}


def compare(cfg: SimConfig) -> tuple[ComparisonReport, RunResult, RunResult]:
    """Paired ETC run and its rho = 0 time-triggered twin on the same schedule."""
    etc = simulate(cfg, monitor=False)
    ttc = simulate(cfg.with_rho(0.0), monitor=False)
    # schedules coincide because timing draws never depend on the state
    if ttc.trace.samples != etc.trace.samples:
        raise RuntimeError("paired runs drew different sampling schedules")
    report = ComparisonReport(ttc_count=list(ttc.trace.transmissions), etc_count=list(etc.trace.transmissions),
                              max_eta_late=max_eta_after(etc.trace, 0.5),
                              max_eta_late_ttc=max_eta_after(ttc.trace, 0.5),
                              saturations=list(etc.trace.saturations))
    return report, etc, ttc


# ----------------------------------------------------------------------------
# Design


def design_table(cfg: SimConfig, tol: float = 1e-5) -> dict:
    """``{network: {T, Delta, phi0_0, phi1_0}}`` for every network with a design table."""
    table = {}
    specs = cfg.design or [None] * len(cfg.networks)
    if all(s is None for s in specs):
        raise DesignError("config has no [network.design] tables")
    for k, spec in enumerate(specs):
        if spec is None:
            continue
        res = max_T_Delta(spec.p0, spec.p1, design_lambda_bar(cfg, k), tol=tol)
        table[str(k + 1)] = res.as_dict()
    return table


def window_maxima(trace: Trace, start_frac: float = 0.5, windows: int = 4) -> list[float]:
    t = trace.t_steps
    norms = np.linalg.norm(trace.eta_steps[t >= start_frac * trace.t_end], axis=1)
    return [float(w.max()) for w in np.array_split(norms, windows) if len(w)]


def settles(maxima: list[float], slack: float = 0.10) -> bool:
    """Each later window stays within ``1 + slack`` of the window before it."""
    return all(b <= (1.0 + slack) * a for a, b in zip(maxima, maxima[1:]))


def jump_counts(trace: Trace) -> dict:
    """Counts recomputed from the records, for cross-checking the summary."""
    n = len(trace.samples)
    out = {"samples": [0] * n, "triggered": [0] * n, "updates": [0] * n}
    for r in trace.records:
        if r.kind is EventKind.SAMPLE:
            out["samples"][r.network] += 1
            out["triggered"][r.network] += int(r.triggered)
        elif r.kind is EventKind.UPDATE:
            out["updates"][r.network] += 1
    return out
