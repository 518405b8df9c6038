"""Monitoring automaton properties over concurrent traces.

A concurrent trace is only safe to linearize for a word-consuming monitor
when every pair of events with dependent labels is ordered. Unordered
dependent pairs are reported as warnings; the verdict obtained from the
linearization is still returned but may be an artifact of the arbitrary
order chosen.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Collection, Iterable, Optional, Union

from .dfa import NONE, Dfa, classical_monitorability, dependence
from .events import TimestampedEvent, VectorClock
from .order import ConcurrentExecution, ConcurrentTrace, check_soundness

log = logging.getLogger(__name__)

BY_CONSTRUCTION = "by-construction"
ASSUMED_UNSOUND = "assumed-unsound"

Soundness = Union[str, ConcurrentExecution]


@dataclass(frozen=True, order=True)
class FaultyPair:
    first: int
    second: int
    labels: tuple[str, str]
    slice: Optional[str] = None

    def to_json(self) -> dict:
        d = {"first": self.first, "second": self.second, "labels": list(self.labels)}
        if self.slice is not None:
            d["slice"] = self.slice
        return d


@dataclass
class TnoReport:
    holds: bool
    faulty: list[FaultyPair]


@dataclass
class MonitorReport:
    verdict: str
    t_mon: bool
    warnings: list[FaultyPair] = field(default_factory=list)
    linearization: list[int] = field(default_factory=list)
    state: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "t_mon": self.t_mon,
            "warnings": [w.to_json() for w in self.warnings],
            "linearization": list(self.linearization),
        }


def _slice_of(ev: TimestampedEvent, slice_key: Optional[str]):
    return None if slice_key is None else getattr(ev.action, slice_key)


def _pair(a: TimestampedEvent, b: TimestampedEvent, slice_key) -> FaultyPair:
    if b.seq < a.seq:
        a, b = b, a
    return FaultyPair(a.seq, b.seq, (a.label, b.label), _slice_of(a, slice_key))


def tno_check(t: ConcurrentTrace, dep: Collection[tuple[str, str]], slice_key: Optional[str] = None) -> TnoReport:
    """All event pairs with dependent labels (within a slice) must be ordered."""
    relevant = {x for p in dep for x in p}
    evs = [e for e in t.events if e.label in relevant]
    faulty = []
    for i, a in enumerate(evs):
        sa = _slice_of(a, slice_key)
        for b in evs[i + 1:]:
            if (a.label, b.label) not in dep:
                continue
            if slice_key is not None and _slice_of(b, slice_key) != sa:
                continue
            if not t.ordered(a, b):
                faulty.append(_pair(a, b, slice_key))
    faulty.sort()
    return TnoReport(not faulty, faulty)


def _sound(t: ConcurrentTrace, soundness: Soundness) -> bool:
    if isinstance(soundness, ConcurrentExecution):
        return check_soundness(soundness, t).holds
    if soundness == BY_CONSTRUCTION:
        return True
    if soundness == ASSUMED_UNSOUND:
        return False
    raise ValueError(f"unknown soundness mode {soundness!r}")


def t_mon(d: Dfa, t: ConcurrentTrace, soundness: Soundness = BY_CONSTRUCTION, slice_key: Optional[str] = None) -> bool:
    """Classical monitorability, trace soundness and necessary order."""
    return (
        classical_monitorability(d)
        and _sound(t, soundness)
        and tno_check(t, dependence(d), slice_key).holds
    )


def linearize(t: ConcurrentTrace) -> list[TimestampedEvent]:
    """Topological order of the trace; ties go to the smallest (tid, idx)."""
    succ: dict[int, list[int]] = {e.seq: [] for e in t.events}
    indeg = dict.fromkeys(succ, 0)
    for a, b in t.order():
        succ[a].append(b)
        indeg[b] += 1
    key = {e.seq: (e.action.tid, e.action.idx, e.seq) for e in t.events}
    heap = [key[s] for s, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        s = heapq.heappop(heap)[2]
        out.append(t.by_seq[s])
        for n in succ[s]:
            indeg[n] -= 1
            if indeg[n] == 0:
                heapq.heappush(heap, key[n])
    if len(out) != len(t.events):
        raise ValueError("trace order is cyclic")
    return out


def monitor_trace(
    d: Dfa,
    t: ConcurrentTrace,
    slice_key: Optional[str] = None,
    soundness: Soundness = BY_CONSTRUCTION,
) -> MonitorReport:
    """Check the trace, linearize it and run the automaton on the result."""
    sigma = set(d.alphabet)
    proj = t.project(sigma)
    tno = tno_check(proj, dependence(d), slice_key)
    ok = classical_monitorability(d) and _sound(t, soundness) and tno.holds
    lin = linearize(proj)
    res = d.run(e.label for e in lin)
    if tno.faulty:
        log.warning("%d unordered dependent pair(s); verdict may be unsound", len(tno.faulty))
    return MonitorReport(res.verdict, ok, tno.faulty, [e.seq for e in lin], res.state)


class StreamMonitor:
    """Online variant fed with timestamped events in engine emission order.

    Each event with a dependent label is compared with retained earlier
    events of its slice; unordered dependent pairs are reported at once.
    With ``threads`` given (every thread id that emits trace events),
    events ordered before the latest event of each of those threads are
    dropped, since no later event can be concurrent with them.
    """

    def __init__(self, d: Dfa, slice_key: Optional[str] = None, threads: Optional[Collection[int]] = None):
        self.dfa = d
        self.sigma = set(d.alphabet)
        self.dep = dependence(d)
        self.relevant = {x for p in self.dep for x in p}
        self.slice_key = slice_key
        self.threads = None if threads is None else set(threads)
        self.monitorable = classical_monitorability(d)
        self.state = d.initial
        self.warnings: list[FaultyPair] = []
        self.linearization: list[int] = []
        self._retained: dict[object, list[TimestampedEvent]] = {}
        self._latest: dict[int, VectorClock] = {}

    def feed(self, ev: TimestampedEvent) -> list[FaultyPair]:
        """Consume one event; returns the warnings it raised."""
        self._latest[ev.tid] = ev.vc
        if ev.label not in self.sigma:
            return []
        self.linearization.append(ev.seq)
        self.state = self.dfa.delta[self.state, ev.label]
        if ev.label not in self.relevant:
            return []
        key = _slice_of(ev, self.slice_key)
        kept = self._retained.setdefault(key, [])
        new = []
        for f in kept:
            if (f.label, ev.label) in self.dep and not f.vc.leq(ev.vc):
                new.append(_pair(f, ev, self.slice_key))
        kept.append(ev)
        if self.threads is not None and len(self._latest) >= len(self.threads):
            latest = [self._latest.get(u) for u in self.threads]
            if all(c is not None for c in latest):
                kept[:] = [f for f in kept if not all(f.vc.leq(c) for c in latest)]
        if new:
            log.warning("unordered dependent events: %s", ", ".join(f"{w.first}/{w.second}" for w in new))
        self.warnings.extend(new)
        return new

    def report(self) -> MonitorReport:
        verdict = "violation" if self.state in self.dfa.verdict else NONE
        return MonitorReport(
            verdict, self.monitorable and not self.warnings, sorted(self.warnings),
            list(self.linearization), self.state,
        )


def monitor_stream(
    d: Dfa,
    events: Iterable[TimestampedEvent],
    slice_key: Optional[str] = None,
    threads: Optional[Collection[int]] = None,
) -> MonitorReport:
    m = StreamMonitor(d, slice_key, threads)
    for ev in events:
        m.feed(ev)
    return m.report()
