"""Actions, vector clocks and the JSON Lines wire format.

One action per line::

    {"seq":0,"tid":0,"kind":"lock","res":"s","idx":0}

Timestamped trace lines carry an extra ``"vc"`` object mapping thread ids
(as strings) to counters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Optional, Sequence

REGULAR = "regular"
RELEASE_KINDS = frozenset({"unlock", "fork", "end", "notify"})
ACQUIRE_KINDS = frozenset({"lock", "begin", "join", "wait"})
MEMORY_KINDS = frozenset({"read", "write"})
SYNC_KINDS = RELEASE_KINDS | ACQUIRE_KINDS | MEMORY_KINDS
KINDS = SYNC_KINDS | {REGULAR}

# Release/acquire pairs share a resource namespace so that a lock named "1"
# never matches fork/join on thread 1.
NAMESPACE = {
    "lock": "lock", "unlock": "lock",
    "fork": "thread", "begin": "thread", "end": "thread", "join": "thread",
    "notify": "signal", "wait": "signal",
}

_FIELDS = ("seq", "tid", "kind", "label", "res", "val", "idx")


class StreamError(ValueError):
    """Base class for wire-format decoding errors."""


class MalformedLine(StreamError):
    pass


class MissingField(StreamError):
    def __init__(self, field: str, line: str = ""):
        super().__init__(f"missing field {field!r}" + (f" in {line!r}" if line else ""))
        self.field = field


class BadKind(StreamError):
    pass


@dataclass(frozen=True, slots=True)
class Action:
    """One observed program step.

    ``seq`` is the arrival index at the collector, ``idx`` the occurrence
    index within thread ``tid``. ``res`` names the lock, variable, signal or
    thread the action touches; ``val`` is only used by reads and writes.
    """

    seq: int
    tid: int
    kind: str
    idx: int
    label: Optional[str] = None
    res: Optional[str] = None
    val: Optional[str] = None

    @property
    def is_sync(self) -> bool:
        return self.kind != REGULAR

    @property
    def key(self):
        """Resource key used to match releases with acquires."""
        return (NAMESPACE[self.kind], self.res)

    def __str__(self) -> str:
        name = self.label if self.kind == REGULAR else self.kind
        extra = "" if self.res is None else f"({self.res}" + (f"={self.val})" if self.val is not None else ")")
        return f"{self.seq}:{name}{extra}@t{self.tid}"


class VectorClock(dict):
    """Thread id -> counter; absent entries count as zero."""

    __slots__ = ()

    def leq(self, other: Mapping[int, int]) -> bool:
        get = other.get
        for t, c in self.items():
            if c > get(t, 0):
                return False
        return True

    def join(self, other: Optional[Mapping[int, int]]) -> "VectorClock":
        """Componentwise max, in place. Joining with ``None`` is a no-op."""
        if other:
            get = self.get
            for t, c in other.items():
                if c > get(t, 0):
                    self[t] = c
        return self

    def concurrent(self, other: "VectorClock") -> bool:
        return not self.leq(other) and not other.leq(self)

    def copy(self) -> "VectorClock":
        return VectorClock(self)

    def to_json(self) -> dict:
        return {str(t): c for t, c in sorted(self.items()) if c}


@dataclass(frozen=True, slots=True)
class TimestampedEvent:
    action: Action
    vc: VectorClock

    @property
    def seq(self) -> int:
        return self.action.seq

    @property
    def label(self) -> Optional[str]:
        return self.action.label

    @property
    def tid(self) -> int:
        return self.action.tid

    def __hash__(self) -> int:
        return hash(self.action)

    def __eq__(self, other) -> bool:
        return isinstance(other, TimestampedEvent) and self.action == other.action and dict(self.vc) == dict(other.vc)


@dataclass(frozen=True)
class StreamViolation:
    rule: str
    seq: int
    tid: int
    message: str


def _as_int(obj: dict, name: str, line: str) -> int:
    if name not in obj or obj[name] is None:
        raise MissingField(name, line)
    v = obj[name]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise MalformedLine(f"field {name!r} must be a non-negative integer: {line!r}")
    return v


def _as_str(obj: dict, name: str) -> Optional[str]:
    v = obj.get(name)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise MalformedLine(f"field {name!r} must be a scalar")
    return str(v)


def action_from_dict(obj: Mapping, line: str = "") -> Action:
    if not isinstance(obj, Mapping):
        raise MalformedLine(f"expected a JSON object: {line!r}")
    seq = _as_int(obj, "seq", line)
    tid = _as_int(obj, "tid", line)
    if "kind" not in obj:
        raise MissingField("kind", line)
    kind = obj["kind"]
    if kind not in KINDS:
        raise BadKind(f"unknown kind {kind!r}")
    idx = _as_int(obj, "idx", line)
    label, res, val = _as_str(obj, "label"), _as_str(obj, "res"), _as_str(obj, "val")
    if kind == REGULAR:
        if label is None:
            raise MissingField("label", line)
    elif kind in ("begin", "end"):
        if res is None:
            res = str(tid)
    elif res is None:
        raise MissingField("res", line)
    if kind in MEMORY_KINDS and val is None:
        raise MissingField("val", line)
    return Action(seq=seq, tid=tid, kind=kind, idx=idx, label=label, res=res, val=val)


def parse_action_line(line: str) -> Action:
    """Decode one JSON Lines record. Unknown fields are ignored."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"{exc}: {line!r}") from None
    return action_from_dict(obj, line)


def action_to_dict(a: Action) -> dict:
    d = {}
    for name in _FIELDS:
        v = getattr(a, name)
        if v is not None:
            d[name] = v
    return d


def serialize_action(a: Action) -> str:
    return json.dumps(action_to_dict(a), separators=(",", ":"))


def serialize_event(e: TimestampedEvent) -> str:
    d = action_to_dict(e.action)
    d["vc"] = e.vc.to_json()
    return json.dumps(d, separators=(",", ":"))


def parse_event_line(line: str) -> TimestampedEvent:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"{exc}: {line!r}") from None
    if "vc" not in obj:
        raise MissingField("vc", line)
    raw = obj["vc"]
    if not isinstance(raw, Mapping):
        raise MalformedLine(f"'vc' must be an object: {line!r}")
    try:
        vc = VectorClock({int(t): int(c) for t, c in raw.items()})
    except (TypeError, ValueError):
        raise MalformedLine(f"bad clock entry: {line!r}") from None
    return TimestampedEvent(action_from_dict(obj, line), vc)


def _lines(source: Iterable[str]) -> Iterator[str]:
    for line in source:
        line = line.strip()
        if line:
            yield line


def read_actions(source: Iterable[str]) -> list[Action]:
    return [parse_action_line(line) for line in _lines(source)]


def read_events(source: Iterable[str]) -> list[TimestampedEvent]:
    return [parse_event_line(line) for line in _lines(source)]


def write_actions(actions: Iterable[Action], fh) -> None:
    for a in actions:
        fh.write(serialize_action(a) + "\n")


def write_events(events: Iterable[TimestampedEvent], fh) -> None:
    for e in events:
        fh.write(serialize_event(e) + "\n")


def validate_stream(actions: Sequence[Action]) -> list[StreamViolation]:
    """Check a seq-ordered stream against the delivery contract.

    Rules: (a) per-thread ``idx`` runs 0,1,2,... without gaps; (b) ``begin``
    is its thread's first action; (c) ``end`` is its thread's last action;
    (d) ``join(u, t)`` comes after ``end(t)``; (e) ``begin(u)`` comes after a
    ``fork`` of ``u``. Out-of-order ``seq`` values are reported as ``order``.
    """
    out: list[StreamViolation] = []
    next_idx: dict[int, int] = {}
    ended: set[int] = set()
    forked: set[str] = set()
    last_seq = -1
    for a in actions:
        if a.seq <= last_seq:
            out.append(StreamViolation("order", a.seq, a.tid, f"seq {a.seq} after {last_seq}"))
        last_seq = max(last_seq, a.seq)
        expected = next_idx.get(a.tid, 0)
        if a.idx != expected:
            out.append(StreamViolation("a", a.seq, a.tid, f"thread {a.tid}: idx {a.idx}, expected {expected}"))
        next_idx[a.tid] = max(expected, a.idx) + 1
        if a.tid in ended:
            out.append(StreamViolation("c", a.seq, a.tid, f"thread {a.tid} acts after its end"))
        if a.kind == "begin":
            if expected != 0 or a.idx != 0:
                out.append(StreamViolation("b", a.seq, a.tid, f"begin is not thread {a.tid}'s first action"))
            if a.res not in forked:
                out.append(StreamViolation("e", a.seq, a.tid, f"begin({a.res}) without a prior fork"))
        elif a.kind == "fork":
            forked.add(a.res)
        elif a.kind == "end":
            ended.add(a.tid)
        elif a.kind == "join":
            if not a.res.isdigit() or int(a.res) not in ended:
                out.append(StreamViolation("d", a.seq, a.tid, f"join({a.res}) before end({a.res})"))
    return out


def regular_only(actions: Iterable[Action]) -> list[Action]:
    """Drop synchronization actions, renumbering per-thread ``idx``.

    Feeding the result to the engine yields the thread-order-only trace.
    """
    counts: dict[int, int] = {}
    out = []
    for a in actions:
        if a.kind == REGULAR:
            i = counts.get(a.tid, 0)
            counts[a.tid] = i + 1
            out.append(replace(a, idx=i))
    return out
