"""Execution orders, trace orders, and the soundness/faithfulness calculus.

Events and actions are identified by their ``seq`` number throughout; an
order is a set of ``(earlier, later)`` seq pairs.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Collection, Iterable, Mapping, Optional, Sequence

from .events import (
    ACQUIRE_KINDS, REGULAR, RELEASE_KINDS, Action, TimestampedEvent, VectorClock,
    action_from_dict, action_to_dict,
)

OrderPair = tuple[int, int]


class CyclicExecution(ValueError):
    pass


class UnknownEvent(KeyError):
    pass


class UnsoundTrace(ValueError):
    pass


class NotMonitorableExecution(ValueError):
    """The execution leaves some dependent pair of events unordered."""


def _thread_edges(actions: Iterable[Action]) -> set[OrderPair]:
    by_tid: dict[int, list[Action]] = defaultdict(list)
    for a in actions:
        by_tid[a.tid].append(a)
    edges = set()
    for acts in by_tid.values():
        acts.sort(key=lambda a: a.idx)
        edges.update((x.seq, y.seq) for x, y in zip(acts, acts[1:]))
    return edges


@dataclass
class ConcurrentExecution:
    """Ground truth: actions plus thread-order and synchronization edges.

    ``thread_edges`` defaults to consecutive same-thread pairs by ``idx``.
    """

    actions: dict[int, Action]
    sync_edges: set[OrderPair] = field(default_factory=set)
    thread_edges: Optional[set[OrderPair]] = None

    def __post_init__(self):
        if not isinstance(self.actions, dict):
            self.actions = {a.seq: a for a in self.actions}
        if self.thread_edges is None:
            self.thread_edges = _thread_edges(self.actions.values())
        for a, b in self.sync_edges | self.thread_edges:
            if a not in self.actions or b not in self.actions:
                raise UnknownEvent((a, b))
        self._closure: Optional[set[OrderPair]] = None

    def edges(self) -> set[OrderPair]:
        return self.thread_edges | self.sync_edges

    def regular(self, sigma: Optional[Collection[str]] = None) -> list[Action]:
        return [
            a for a in self.actions.values()
            if a.kind == REGULAR and (sigma is None or a.label in sigma)
        ]

    def order(self) -> set[OrderPair]:
        if self._closure is None:
            self._closure = execution_order(self)
        return self._closure

    def order_over(self, seqs: Collection[int]) -> set[OrderPair]:
        """The execution order restricted to ``seqs`` x ``seqs``."""
        keep = set(seqs)
        return {(a, b) for a, b in self.order() if a in keep and b in keep}

    def to_json(self) -> dict:
        return {
            "actions": [action_to_dict(a) for a in sorted(self.actions.values(), key=lambda a: a.seq)],
            "thread_edges": sorted(map(list, self.thread_edges)),
            "sync_edges": sorted(map(list, self.sync_edges)),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ConcurrentExecution":
        try:
            actions = [action_from_dict(d) for d in obj["actions"]]
            sync = {(int(a), int(b)) for a, b in obj.get("sync_edges", ())}
            thread = obj.get("thread_edges")
            if thread is not None:
                thread = {(int(a), int(b)) for a, b in thread}
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed ground truth: {exc!r}") from None
        return cls({a.seq: a for a in actions}, sync, thread)


def execution_order(e: ConcurrentExecution) -> set[OrderPair]:
    """Strict transitive closure of thread and synchronization edges.

    Brute force over the edge graph; serves as the oracle for the engine.
    """
    nodes = list(e.actions)
    pos = {s: i for i, s in enumerate(nodes)}
    succ: dict[int, list[int]] = defaultdict(list)
    indeg = [0] * len(nodes)
    for a, b in e.edges():
        succ[pos[a]].append(pos[b])
        indeg[pos[b]] += 1
    # Kahn's algorithm; leftover nodes mean a cycle
    ready = [i for i, d in enumerate(indeg) if d == 0]
    topo = []
    while ready:
        i = ready.pop()
        topo.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if len(topo) != len(nodes):
        raise CyclicExecution("edge relation has a cycle")
    reach = [0] * len(nodes)
    for i in reversed(topo):
        r = 0
        for j in succ[i]:
            r |= reach[j] | (1 << j)
        reach[i] = r
    out = set()
    for i, r in enumerate(reach):
        a = nodes[i]
        j = 0
        while r:
            if r & 1:
                out.add((a, nodes[j]))
            r >>= 1
            j += 1
    return out


def execution_from_stream(actions: Sequence[Action]) -> ConcurrentExecution:
    """Reconstruct ground truth for an ingested stream.

    Each acquire is matched with the latest preceding release on the same
    resource in seq order, each read with the latest preceding write of the
    same value to the same variable. Arrival order is treated as one legal
    linearization of the execution.
    """
    last_release: dict[tuple, int] = {}
    last_write: dict[tuple, int] = {}
    sync = set()
    for a in sorted(actions, key=lambda a: a.seq):
        if a.kind in RELEASE_KINDS:
            last_release[a.key] = a.seq
        elif a.kind in ACQUIRE_KINDS:
            r = last_release.get(a.key)
            if r is not None:
                sync.add((r, a.seq))
        elif a.kind == "write":
            last_write[(a.res, a.val)] = a.seq
        elif a.kind == "read":
            w = last_write.get((a.res, a.val))
            if w is not None:
                sync.add((w, a.seq))
    return ConcurrentExecution({a.seq: a for a in actions}, sync)


class ConcurrentTrace:
    """A set of timestamped events ordered by clock comparison.

    ``relation`` overrides the clock order with an explicit set of seq pairs,
    which lets hand-built posets (and sub-orders) be treated as traces.
    """

    def __init__(self, events: Iterable[TimestampedEvent], relation: Optional[Iterable[OrderPair]] = None):
        self.events: list[TimestampedEvent] = list(events)
        self.by_seq: dict[int, TimestampedEvent] = {e.seq: e for e in self.events}
        self.relation: Optional[frozenset[OrderPair]] = None if relation is None else frozenset(relation)
        self._order: Optional[frozenset[OrderPair]] = self.relation

    @classmethod
    def from_relation(cls, actions: Iterable[Action], relation: Iterable[OrderPair]) -> "ConcurrentTrace":
        return cls((TimestampedEvent(a, VectorClock()) for a in actions), relation)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def _get(self, x) -> TimestampedEvent:
        seq = x.seq if hasattr(x, "seq") else x
        try:
            return self.by_seq[seq]
        except KeyError:
            raise UnknownEvent(seq) from None

    def happens_before(self, a, b) -> bool:
        ea, eb = self._get(a), self._get(b)
        if ea.seq == eb.seq:
            return False
        if self.relation is not None:
            return (ea.seq, eb.seq) in self.relation
        return ea.vc.leq(eb.vc)

    def ordered(self, a, b) -> bool:
        return self.happens_before(a, b) or self.happens_before(b, a)

    def order(self) -> frozenset[OrderPair]:
        if self._order is None:
            evs = self.events
            pairs = set()
            for i, a in enumerate(evs):
                va = a.vc
                for b in evs[i + 1:]:
                    if va.leq(b.vc):
                        pairs.add((a.seq, b.seq))
                    elif b.vc.leq(va):
                        pairs.add((b.seq, a.seq))
            self._order = frozenset(pairs)
        return self._order

    def project(self, sigma: Collection[str]) -> "ConcurrentTrace":
        """Keep only events whose label is in ``sigma``."""
        keep = [e for e in self.events if e.label in sigma]
        if self.relation is None:
            return ConcurrentTrace(keep)
        seqs = {e.seq for e in keep}
        return ConcurrentTrace(keep, {(a, b) for a, b in self.relation if a in seqs and b in seqs})

    def with_relation(self, relation: Iterable[OrderPair]) -> "ConcurrentTrace":
        return ConcurrentTrace(self.events, relation)

    def labels(self) -> set[str]:
        return {e.label for e in self.events}


def linear_trace(actions: Iterable[Action]) -> ConcurrentTrace:
    """Regular events totally ordered by arrival, as a word-based monitor sees them.

    Each event gets the single-component clock ``{0: position}``.
    """
    regs = sorted((a for a in actions if a.kind == REGULAR), key=lambda a: a.seq)
    return ConcurrentTrace(TimestampedEvent(a, VectorClock({0: i + 1})) for i, a in enumerate(regs))


def thread_order_trace(actions: Iterable[Action]) -> ConcurrentTrace:
    """Regular events ordered by program order only, ignoring synchronization.

    Equivalent to running the engine on the regular events alone, but keeps
    the original actions so the result can be checked against ground truth.
    """
    counts: dict[int, int] = defaultdict(int)
    evs = []
    for a in sorted(actions, key=lambda a: a.seq):
        if a.kind == REGULAR:
            counts[a.tid] += 1
            evs.append(TimestampedEvent(a, VectorClock({a.tid: counts[a.tid]})))
    return ConcurrentTrace(evs)


def happens_before(t: ConcurrentTrace, a, b) -> bool:
    return t.happens_before(a, b)


def project(order: Iterable[OrderPair], events: Mapping[int, Action], sigma: Collection[str]) -> set[OrderPair]:
    """Keep pairs whose endpoints both carry labels in ``sigma``."""
    def ok(s):
        a = events.get(s)
        return a is not None and a.label in sigma
    return {(a, b) for a, b in order if ok(a) and ok(b)}


@dataclass
class SoundnessReport:
    holds: bool
    violations: list[OrderPair]
    unknown_events: list[int] = field(default_factory=list)


@dataclass
class FaithfulnessReport:
    holds: bool
    missing: list[OrderPair]


def _unknown(e: ConcurrentExecution, t: ConcurrentTrace) -> list[int]:
    return sorted(ev.seq for ev in t.events if e.actions.get(ev.seq) != ev.action)


def check_soundness(e: ConcurrentExecution, t: ConcurrentTrace) -> SoundnessReport:
    """Sound iff every trace event is an execution action and ``->t`` is
    contained in the execution order."""
    unknown = _unknown(e, t)
    exec_order = e.order()
    violations = sorted(p for p in t.order() if p not in exec_order)
    return SoundnessReport(not violations and not unknown, violations, unknown)


def check_faithfulness(e: ConcurrentExecution, t: ConcurrentTrace) -> FaithfulnessReport:
    """Faithful iff ``->t`` contains the execution order over the trace's events."""
    tord = t.order()
    missing = sorted(p for p in e.order_over(t.by_seq) if p not in tord)
    return FaithfulnessReport(not missing, missing)


def faithfulness_ratio(e: ConcurrentExecution, t: ConcurrentTrace) -> Fraction:
    """``|->t| / |->e restricted to the trace events|``; 1 when nothing is ordered."""
    if not check_soundness(e, t).holds:
        raise UnsoundTrace("faithfulness ratio is only defined for sound traces")
    denom = len(e.order_over(t.by_seq))
    if denom == 0:
        return Fraction(1)
    return Fraction(len(t.order()), denom)


def closure(pairs: Iterable[OrderPair]) -> set[OrderPair]:
    """Transitive closure of an arbitrary (acyclic) relation."""
    succ: dict[int, set[int]] = defaultdict(set)
    for a, b in pairs:
        succ[a].add(b)
    out = set()
    for start in list(succ):
        stack, seen = list(succ[start]), set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(succ.get(n, ()))
        out.update((start, n) for n in seen)
    return out


def required_pairs(e: ConcurrentExecution, dependence: Collection[tuple[str, str]], sigma: Collection[str]) -> set[OrderPair]:
    """Execution-ordered pairs over ``sigma`` events whose labels are dependent."""
    evs = {a.seq: a for a in e.regular(sigma)}
    order = e.order_over(evs)
    return {(a, b) for a, b in order if (evs[a].label, evs[b].label) in dependence}


def optimal_ratio(e: ConcurrentExecution, dependence: Collection[tuple[str, str]], sigma: Collection[str]) -> Fraction:
    """Smallest faithfulness ratio that still keeps every dependent pair ordered.

    Any sound, transitive trace order that orders all dependent pairs must
    contain the closure of the required pairs, so that closure is the
    minimal monitorable order.
    """
    evs = e.regular(sigma)
    order = e.order_over({a.seq for a in evs})
    for i, a in enumerate(evs):
        for b in evs[i + 1:]:
            if (a.label, b.label) in dependence and (a.seq, b.seq) not in order and (b.seq, a.seq) not in order:
                raise NotMonitorableExecution(f"dependent events {a} and {b} are unordered")
    if not order:
        return Fraction(1)
    return Fraction(len(closure(required_pairs(e, dependence, sigma))), len(order))
