import numpy as np
import pytest

from etnqcs.harness import simulate
from etnqcs.hybrid import EventKind, EventRecord, HybridState, Trace, run
from etnqcs.monitor import MonitorError, check_trace_invariants, lyapunov_monitor, lyapunov_u
from etnqcs.models import zero_dynamics_model

from conftest import short


def _zero_state(b=0):
    z1 = np.zeros(1)
    return HybridState(z1, z1, z1, z1, z1, z1, np.zeros(1, int), np.array([b]), np.array([1]))


@pytest.fixture(scope="module")
def zero_setup():
    from test_hybrid import _net
    m = zero_dynamics_model(((1,),))
    return m, [_net(m)]


def test_all_zero_trace(zero_setup):
    m, cfg = zero_setup
    s0, s1 = _zero_state(0), _zero_state(1)
    assert lyapunov_u(s0, m, cfg) == 0.0
    tr = Trace(records=[EventRecord(0.005, 1, 0, EventKind.SAMPLE, 0.0, True, s0, s1, 1),
                        EventRecord(0.006, 2, 0, EventKind.UPDATE, np.nan, True, s1, s0)])
    rep = lyapunov_monitor(tr, m, cfg)
    assert rep.ok and rep.sampling_checked == 1 and rep.update_checked == 1
    assert [u for _, _, u in rep.u_values] == [0.0, 0.0]


def test_missing_snapshots_rejected(zero_setup):
    m, cfg = zero_setup
    tr = run(m, cfg, 0.05, 1e-4, keep_snapshots=False)
    with pytest.raises(MonitorError):
        lyapunov_monitor(tr, m, cfg)


@pytest.fixture(scope="module")
def rr_short(rr_cfg):
    return simulate(short(rr_cfg, 1.0), monitor=False)


def test_short_rr_run_clean(rr_short):
    res = rr_short
    rep = lyapunov_monitor(res.trace, res.model, res.config.networks)
    assert rep.sampling_checked > 0 and rep.update_checked > 0
    assert rep.violations == []
    assert check_trace_invariants(res.trace, res.config.networks, res.model) == []


def test_zero_contraction_probe_fires(rr_short):
    res = rr_short
    rep = lyapunov_monitor(res.trace, res.model, res.config.networks, lam=(0.0, 0.0), track_u=False)
    assert rep.count("sampling") == rep.sampling_checked > 0


def test_report_dict(rr_short):
    res = rr_short
    d = lyapunov_monitor(res.trace, res.model, res.config.networks, track_u=False).as_dict()
    assert d["sampling_violations"] == 0 and d["update_violations"] == 0 and d["u_increases"] == 0


def test_invariant_checker_catches_tampering(rr_short):
    res = rr_short
    recs = list(res.trace.records)
    k = next(i for i, r in enumerate(recs) if r.kind is EventKind.SAMPLE and r.j > 3)
    r = recs[k]
    recs[k] = EventRecord(r.t, r.j, r.network, r.kind, r.gamma_value, r.triggered, r.pre,
                          r.post.with_(x=r.post.x + 1.0), r.node)
    bad = Trace(records=recs)
    problems = check_trace_invariants(bad, res.config.networks, res.model)
    assert any("changed x" in p for p in problems)
    bad = Trace(records=[x for i, x in enumerate(res.trace.records) if i != k])
    assert check_trace_invariants(bad, res.config.networks, res.model)
