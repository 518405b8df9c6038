"""Non-blocking vector clock reordering.

The engine consumes a stream of actions honoring the delivery contract
(per-thread program order, every acquire after its matching release) and
timestamps regular events so that clock comparison recovers a sound
partial order. Synchronization actions update the engine state and are
then discarded.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .events import ACQUIRE_KINDS, RELEASE_KINDS, REGULAR, Action, TimestampedEvent, VectorClock

log = logging.getLogger(__name__)


class ContractViolation(RuntimeError):
    """The stream broke the delivery contract; the stream is unusable."""


@dataclass(frozen=True, slots=True)
class TimestampedSyncAction:
    action: Action
    vc: VectorClock


@dataclass
class EngineState:
    """``last``: per-thread clock; ``releases``: last release per resource;
    ``writes``: last unconflicted write per (variable, value); ``trace``:
    timestamped regular events in delivery order."""

    last: dict[int, VectorClock] = field(default_factory=dict)
    releases: dict[tuple, TimestampedSyncAction] = field(default_factory=dict)
    writes: dict[tuple, TimestampedSyncAction] = field(default_factory=dict)
    trace: list[TimestampedEvent] = field(default_factory=list)
    conflicts: int = 0


def release_or_acquire(state: EngineState, e: Action, vc: VectorClock) -> None:
    if e.kind in RELEASE_KINDS:
        # vc is incremented in place afterwards, so R holds the post-increment clock
        state.releases[e.key] = TimestampedSyncAction(e, vc)
    elif e.kind in ACQUIRE_KINDS:
        rel = state.releases.get(e.key)
        if rel is not None:
            vc.join(rel.vc)
    else:
        raise ValueError(f"not a release/acquire action: {e}")


def read_or_write(state: EngineState, e: Action, vc: VectorClock) -> None:
    key = (e.res, e.val)
    if e.kind == "write":
        prev = state.writes.get(key)
        if prev is None or prev.vc.leq(vc):
            state.writes[key] = TimestampedSyncAction(e, vc)
        else:
            del state.writes[key]
            state.conflicts += 1
            log.debug("conflicting write %s clears W%s", e, key)
    elif e.kind == "read":
        w = state.writes.get(key)
        if w is not None:
            vc.join(w.vc)
    else:
        raise ValueError(f"not a read/write action: {e}")


def receive_action(state: EngineState, e: Action) -> None:
    """Process one action, mutating ``state``."""
    t = e.tid
    prev = state.last.get(t)
    expected = prev[t] if prev else 0
    if e.idx != expected:
        raise ContractViolation(f"thread {t}: got idx {e.idx}, expected {expected} ({e})")
    vc = VectorClock(prev) if prev else VectorClock()
    kind = e.kind
    if kind != REGULAR:
        if kind == "read" or kind == "write":
            read_or_write(state, e, vc)
        else:
            release_or_acquire(state, e, vc)
    # stored clocks are never mutated again: the next action copies last[t]
    vc[t] = expected + 1
    state.last[t] = vc
    if kind == REGULAR:
        state.trace.append(TimestampedEvent(e, vc))


class VectorClockEngine:
    """Inline engine: the caller drives :meth:`receive` synchronously."""

    def __init__(self):
        self.state = EngineState()

    def receive(self, action: Action) -> None:
        receive_action(self.state, action)

    def feed(self, actions: Iterable[Action]) -> "VectorClockEngine":
        st = self.state
        for a in actions:
            receive_action(st, a)
        return self

    def finalize(self):
        from .order import ConcurrentTrace

        return ConcurrentTrace(list(self.state.trace))


_STOP = object()


class DecoupledEngine:
    """Engine behind an ordered queue, drained by a background consumer.

    Producers call :meth:`submit`; the consumer thread applies actions in
    queue order, so the result equals the inline engine on the same
    delivery sequence. A contract violation stops the consumer and is
    re-raised from :meth:`close`.
    """

    def __init__(self, batch: int = 1024):
        self.engine = VectorClockEngine()
        self._q: queue.SimpleQueue = queue.SimpleQueue()
        self._error: Optional[BaseException] = None
        self._batch = batch
        self._pending: list[Action] = []
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._drain, name="vc-engine", daemon=True)
        self._thread.start()

    def _drain(self) -> None:
        st = self.engine.state
        while True:
            item = self._q.get()
            if item is _STOP:
                return
            if self._error is not None:
                continue
            try:
                for a in item:
                    receive_action(st, a)
            except BaseException as exc:  # surfaced by close()
                self._error = exc

    def submit(self, action: Action) -> None:
        with self._lock:
            self._pending.append(action)
            if len(self._pending) >= self._batch:
                self._q.put(self._pending)
                self._pending = []

    def submit_many(self, actions: Iterable[Action]) -> None:
        it = iter(actions)
        while True:
            chunk = list(itertools.islice(it, self._batch))
            if not chunk:
                return
            with self._lock:
                if self._pending:
                    self._q.put(self._pending)
                    self._pending = []
                self._q.put(chunk)

    def close(self):
        with self._lock:
            if self._pending:
                self._q.put(self._pending)
                self._pending = []
            self._q.put(_STOP)
        self._thread.join()
        if self._error is not None:
            raise self._error
        return self.engine.finalize()


def reorder(actions: Iterable[Action], mode: str = "inline"):
    """Run the engine over ``actions`` and return the concurrent trace."""
    if mode == "inline":
        return VectorClockEngine().feed(actions).finalize()
    if mode == "decoupled":
        eng = DecoupledEngine()
        try:
            eng.submit_many(actions)
        finally:
            trace = eng.close()
        return trace
    raise ValueError(f"unknown mode {mode!r}")
