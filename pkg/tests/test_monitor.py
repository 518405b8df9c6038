from __future__ import annotations

import pytest

from cotrace.dfa import NONE, VIOLATION, dependence, mutual_exclusion_p2, one_state, response_between_p1
from cotrace.engine import reorder
from cotrace.events import REGULAR, Action
from cotrace.monitor import (
    ASSUMED_UNSOUND, BY_CONSTRUCTION, StreamMonitor, linearize, monitor_stream, monitor_trace, t_mon,
    tno_check,
)
from cotrace.order import ConcurrentTrace, linear_trace, thread_order_trace
from cotrace.patterns import PatternSpec, build_pattern
from cotrace.simulator import simulate

P2 = mutual_exclusion_p2()
SIGMA2 = set(P2.alphabet)


def _poset(labels, relation, tids=None, res=None):
    acts = [
        Action(i, (tids or list(range(len(labels))))[i], REGULAR, 0, label=l, res=None if res is None else res[i])
        for i, l in enumerate(labels)
    ]
    return ConcurrentTrace.from_relation(acts, relation)


def test_tno_on_rw_traces():
    res = simulate("rw", 0)
    assert tno_check(reorder(res.stream).project(SIGMA2), dependence(P2)).holds
    rep = tno_check(thread_order_trace(res.stream).project(SIGMA2), dependence(P2))
    assert not rep.holds
    assert all(p.first < p.second for p in rep.faulty)


def test_tno_ignores_independent_pairs():
    t = _poset(["br", "ar"], ())
    assert tno_check(t, dependence(P2)).holds
    t = _poset(["bw", "br"], ())
    rep = tno_check(t, dependence(P2))
    assert [(p.first, p.second, p.labels) for p in rep.faulty] == [(0, 1, ("bw", "br"))]


def test_slicing_by_resource():
    t = _poset(["bw", "br"], (), res=["a", "b"])
    assert not tno_check(t, dependence(P2)).holds
    assert tno_check(t, dependence(P2), slice_key="res").holds
    t = _poset(["bw", "br"], (), res=["a", "a"])
    rep = tno_check(t, dependence(P2), slice_key="res")
    assert rep.faulty[0].slice == "a"
    assert rep.faulty[0].to_json()["slice"] == "a"


def test_t_mon_components():
    res = simulate("prods-cons", 0)
    t = reorder(res.stream).project(SIGMA2)
    assert t_mon(P2, t)
    assert t_mon(P2, t, soundness=res.ground_truth)
    assert not t_mon(P2, t, soundness=ASSUMED_UNSOUND)
    assert not t_mon(one_state(P2.alphabet), t)
    with pytest.raises(ValueError):
        t_mon(P2, t, soundness="maybe")


def test_soundness_checked_against_ground_truth():
    res = simulate("rw", 0)
    lin = linear_trace(res.stream)
    assert not monitor_trace(P2, lin, soundness=res.ground_truth).t_mon
    assert monitor_trace(P2, lin, soundness=BY_CONSTRUCTION).t_mon


def test_linearize_respects_order_and_breaks_ties_by_thread():
    t = _poset(["a", "b", "c"], {(2, 0)}, tids=[0, 1, 2])
    assert [e.seq for e in linearize(t)] == [1, 2, 0]
    res = simulate("bakery", 1)
    tr = reorder(res.stream)
    pos = {e.seq: i for i, e in enumerate(linearize(tr))}
    assert all(pos[a] < pos[b] for a, b in tr.order())


def test_monitor_verdicts():
    ok = monitor_trace(P2, reorder(simulate("rw", 3).stream))
    assert (ok.verdict, ok.t_mon, ok.warnings) == (NONE, True, [])
    bad = _poset(["bw", "br", "aw"], {(0, 1), (1, 2), (0, 2)})
    rep = monitor_trace(P2, bad)
    assert rep.verdict == VIOLATION and rep.t_mon
    assert rep.to_json()["linearization"] == [0, 1, 2]


def test_unordered_dependent_pair_warns(caplog):
    faulty = reorder(simulate("bakery-faulty", 0).stream)
    with caplog.at_level("WARNING", logger="cotrace.monitor"):
        rep = monitor_trace(P2, faulty)
    assert not rep.t_mon and rep.warnings
    assert "unordered" in caplog.text


def test_empty_trace():
    rep = monitor_trace(response_between_p1(), ConcurrentTrace([]))
    assert rep.verdict == NONE and rep.t_mon and rep.linearization == []


def test_response_between_window_is_not_monitorable_without_sync():
    d = response_between_p1()
    assert not monitor_trace(d, reorder(simulate("response-between", 0).stream)).t_mon
    rep = monitor_trace(d, reorder(simulate("response-between", 0, {"sync": True}).stream))
    assert rep.t_mon and rep.verdict == NONE


def test_precedence_demo():
    d = build_pattern(PatternSpec("precedence", symbols=("r", "g")))
    dep = dependence(d)
    assert not tno_check(reorder(simulate("precedence-demo", 2).stream), dep).holds
    assert tno_check(reorder(simulate("precedence-demo", 2, {"sync": True}).stream), dep).holds
    # once r is seen no violation is reachable, so the automaton itself is not monitorable
    assert not monitor_trace(d, reorder(simulate("precedence-demo", 2, {"sync": True}).stream)).t_mon


@pytest.mark.parametrize("name", ["rw", "prods-cons", "prods-cons-faulty", "bakery", "bakery-faulty"])
def test_stream_monitor_agrees_with_offline(name):
    for seed in range(5):
        res = simulate(name, seed)
        t = reorder(res.stream)
        off = monitor_trace(P2, t)
        on = monitor_stream(P2, t.events)
        assert on.t_mon == off.t_mon
        assert {(w.first, w.second) for w in on.warnings} == {(w.first, w.second) for w in off.warnings}
        threads = {a.tid for a in res.stream}
        pruned = monitor_stream(P2, t.events, threads=threads)
        assert pruned.warnings == on.warnings


def test_stream_monitor_prunes_settled_events():
    res = simulate("prods-cons", 0, {"items": 6})
    t = reorder(res.stream)
    m = StreamMonitor(P2, threads={e.tid for e in t.events})
    for ev in t.events:
        m.feed(ev)
    kept = sum(len(v) for v in m._retained.values())
    assert kept < len(t.project(SIGMA2))
