"""Seeded simulation of concurrent programs.

Thread programs are generators yielding operations; a seeded scheduler
repeatedly picks one enabled thread and executes its next operation,
emitting one action per step. The ground truth records the exact
release->acquire (and write->read) pairs as they were scheduled.

Operations a program may yield::

    ("regular", label[, res])   ("lock", l)     ("unlock", l)
    ("fork", program)  -> tid   ("join", tid)   ("read", x) -> value
    ("write", x, value)         ("notify", s)   ("wait", s)

Forked threads implicitly begin with ``begin`` and finish with ``end``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Optional

from .engine import ContractViolation
from .events import Action, validate_stream
from .order import ConcurrentExecution, execution_from_stream

Program = Callable[[], Iterator[tuple]]


class UnknownScenario(KeyError):
    pass


class BadParams(ValueError):
    pass


class SimulationError(RuntimeError):
    """Deadlock, livelock or a program misusing a primitive."""


@dataclass(frozen=True)
class Scenario:
    name: str
    params: Mapping[str, Any]
    description: str
    build: Callable = field(repr=False, compare=False, default=None)


@dataclass
class SimResult:
    stream: list[Action]
    ground_truth: ConcurrentExecution


@dataclass
class _Thread:
    tid: int
    gen: Iterator[tuple]
    pending: Optional[tuple] = None
    idx: int = 0
    done: bool = False
    forked: bool = False
    started: bool = False


class Scheduler:
    """Random interleaving of thread programs with lock/join/wait blocking."""

    def __init__(self, rng: random.Random, memory: Optional[dict] = None, max_steps: int = 1_000_000):
        self.rng = rng
        self.memory: dict[str, str] = dict(memory or {})
        self.max_steps = max_steps
        self.threads: dict[int, _Thread] = {}
        self.stream: list[Action] = []
        self.sync: set[tuple[int, int]] = set()
        self.holder: dict[str, int] = {}
        self.last_unlock: dict[str, int] = {}
        self.fork_seq: dict[int, int] = {}
        self.end_seq: dict[int, int] = {}
        self.last_write: dict[str, int] = {}
        self.notifies: dict[str, list[int]] = {}

    def _spawn(self, program: Program, forked: bool) -> int:
        tid = len(self.threads)
        th = _Thread(tid, program(), forked=forked)
        th.pending = ("begin",) if forked else self._advance(th, None)
        self.threads[tid] = th
        return tid

    def _advance(self, th: _Thread, value) -> tuple:
        try:
            if not th.started:
                th.started = True
                return next(th.gen)
            return th.gen.send(value)
        except StopIteration:
            return ("end",) if th.forked else ("halt",)

    def _enabled(self, th: _Thread) -> bool:
        op = th.pending
        kind = op[0]
        if kind == "lock":
            h = self.holder.get(op[1])
            if h == th.tid:
                raise SimulationError(f"thread {th.tid} re-acquires lock {op[1]!r}")
            return h is None
        if kind == "join":
            return op[1] in self.end_seq
        if kind == "wait":
            return bool(self.notifies.get(op[1]))
        return True

    def _emit(self, th: _Thread, kind: str, **kw) -> Action:
        a = Action(seq=len(self.stream), tid=th.tid, kind=kind, idx=th.idx, **kw)
        th.idx += 1
        self.stream.append(a)
        return a

    def _execute(self, th: _Thread):
        op = th.pending
        kind = op[0]
        result = None
        if kind == "regular":
            self._emit(th, "regular", label=op[1], res=op[2] if len(op) > 2 else None)
        elif kind == "lock":
            a = self._emit(th, "lock", res=op[1])
            self.holder[op[1]] = th.tid
            if op[1] in self.last_unlock:
                self.sync.add((self.last_unlock[op[1]], a.seq))
        elif kind == "unlock":
            if self.holder.get(op[1]) != th.tid:
                raise SimulationError(f"thread {th.tid} unlocks {op[1]!r} without holding it")
            a = self._emit(th, "unlock", res=op[1])
            del self.holder[op[1]]
            self.last_unlock[op[1]] = a.seq
        elif kind == "fork":
            tid = len(self.threads)
            a = self._emit(th, "fork", res=str(tid))
            self.fork_seq[tid] = a.seq
            result = self._spawn(op[1], forked=True)
        elif kind == "begin":
            a = self._emit(th, "begin", res=str(th.tid))
            self.sync.add((self.fork_seq[th.tid], a.seq))
        elif kind == "end":
            a = self._emit(th, "end", res=str(th.tid))
            self.end_seq[th.tid] = a.seq
            th.done = True
            return
        elif kind == "halt":
            th.done = True
            return
        elif kind == "join":
            a = self._emit(th, "join", res=str(op[1]))
            self.sync.add((self.end_seq[op[1]], a.seq))
        elif kind == "read":
            result = self.memory.get(op[1], "0")
            a = self._emit(th, "read", res=op[1], val=result)
            if op[1] in self.last_write:
                self.sync.add((self.last_write[op[1]], a.seq))
        elif kind == "write":
            a = self._emit(th, "write", res=op[1], val=str(op[2]))
            self.memory[op[1]] = str(op[2])
            self.last_write[op[1]] = a.seq
        elif kind == "notify":
            a = self._emit(th, "notify", res=op[1])
            self.notifies.setdefault(op[1], []).append(a.seq)
        elif kind == "wait":
            a = self._emit(th, "wait", res=op[1])
            # the wait consumes one notification but synchronizes with the latest
            pending = self.notifies[op[1]]
            self.sync.add((pending[-1], a.seq))
            pending.pop(0)
        else:
            raise SimulationError(f"unknown operation {op!r}")
        th.pending = self._advance(th, result)

    def run(self, main: Program) -> SimResult:
        self._spawn(main, forked=False)
        steps = 0
        while True:
            live = [th for th in self.threads.values() if not th.done]
            if not live:
                break
            enabled = [th for th in live if self._enabled(th)]
            if not enabled:
                raise SimulationError("deadlock: no enabled thread")
            steps += 1
            if steps > self.max_steps:
                raise SimulationError("step budget exhausted")
            self._execute(self.rng.choice(enabled))
        actions = {a.seq: a for a in self.stream}
        return SimResult(self.stream, ConcurrentExecution(actions, set(self.sync)))


# ---------------------------------------------------------------- scenarios

def _fork_join(workers):
    def main():
        tids = []
        for w in workers:
            tids.append((yield ("fork", w)))
        for t in tids:
            yield ("join", t)
    return main


def _rw(p, rng):
    readers = p["readers"]

    def write():
        yield ("lock", "s")
        yield ("regular", "bw", "x")
        yield ("regular", "w", "x")
        yield ("regular", "aw", "x")
        yield ("unlock", "s")

    def reader():
        yield ("lock", "c")
        yield ("regular", "i", "c")
        yield ("unlock", "c")
        yield ("regular", "br", "x")
        yield ("regular", "r", "x")
        yield ("regular", "ar", "x")

    def main():
        yield from write()
        tids = []
        for _ in range(readers):
            tids.append((yield ("fork", reader)))
        for t in tids:
            yield ("join", t)
        yield from write()
    return main


def _prods_cons(p, rng, faulty=False):
    producers, consumers, items = p["producers"], p["consumers"], p["items"]
    total = producers * items
    rogue = p.get("rogue", 0) if faulty else 0

    def producer():
        for _ in range(items):
            yield ("lock", "buf")
            c = int((yield ("read", "count")))
            yield ("regular", "bw", "buf")
            yield ("write", "count", c + 1)
            yield ("regular", "aw", "buf")
            yield ("unlock", "buf")

    def consumer():
        while True:
            yield ("lock", "buf")
            taken = int((yield ("read", "taken")))
            if taken >= total:
                yield ("unlock", "buf")
                return
            c = int((yield ("read", "count")))
            if c > 0:
                yield ("regular", "br", "buf")
                yield ("write", "count", c - 1)
                yield ("write", "taken", taken + 1)
                yield ("regular", "ar", "buf")
            yield ("unlock", "buf")

    def rogue_consumer():
        # consumes without taking the buffer lock
        for _ in range(items):
            yield ("regular", "br", "buf")
            yield ("regular", "ar", "buf")

    workers = [producer] * producers + [consumer] * (consumers - rogue) + [rogue_consumer] * rogue
    return _fork_join(workers)


def _bakery(p, rng, faulty=False):
    n, iterations = p["threads"], p["iterations"]
    rogue = p.get("rogue", 0) if faulty else 0

    def worker(i, careless):
        def prog():
            for _ in range(iterations):
                if careless:
                    # enters the critical section without taking a ticket
                    yield ("regular", "bw", "cs")
                    yield ("regular", "aw", "cs")
                    continue
                yield ("write", f"choosing{i}", 1)
                mx = 0
                for j in range(n):
                    mx = max(mx, int((yield ("read", f"number{j}"))))
                mine = mx + 1
                yield ("write", f"number{i}", mine)
                yield ("write", f"choosing{i}", 0)
                for j in range(n):
                    if j == i:
                        continue
                    while (yield ("read", f"choosing{j}")) == "1":
                        pass
                    while True:
                        nj = int((yield ("read", f"number{j}")))
                        if nj == 0 or (nj, j) > (mine, i):
                            break
                yield ("regular", "bw", "cs")
                yield ("regular", "aw", "cs")
                yield ("write", f"number{i}", 0)
        return prog

    # rogue threads are the last ``rogue`` workers
    return _fork_join([worker(i, i >= n - rogue) for i in range(n)])


def _precedence_demo(p, rng):
    def requester():
        yield ("regular", "r", "x")
        if p["sync"]:
            yield ("notify", "granted")

    def granter():
        if p["sync"]:
            yield ("wait", "granted")
        yield ("regular", "g", "x")

    return _fork_join([requester, granter])


def _response_between(p, rng):
    def urgent():
        yield ("regular", "p", "task")
        yield ("regular", "s", "task")

    def normal():
        for _ in range(p["tasks"]):
            yield ("regular", "q", "task")
            if p["sync"]:
                t = yield ("fork", urgent)
                yield ("join", t)
            yield ("regular", "r", "task")

    workers = [normal] if p["sync"] else [normal, *[urgent] * p["tasks"]]
    return _fork_join(workers)


def _random(p, rng):
    """Random lock/fork/join programs; with ``rw`` also reads and writes of
    a few variables drawn from a small value range, so (x, v) pairs collide."""
    k = p["threads"]
    budget = max(p["actions"] - 2 * (k - 1) * 2, k)
    labels = [chr(ord("a") + i) for i in range(p["labels"])]
    locks = [f"l{i}" for i in range(p["locks"])]
    variables = [f"v{i}" for i in range(p["variables"])]
    per = max(1, budget // k)

    def plan():
        ops = []
        while len(ops) < per:
            roll = rng.random()
            if roll < 0.35 or not locks:
                ops.append(("regular", rng.choice(labels)))
            elif roll < 0.7 or not p["rw"]:
                l = rng.choice(locks)
                body = [("regular", rng.choice(labels)) for _ in range(rng.randint(0, 2))]
                ops += [("lock", l), *body, ("unlock", l)]
            elif roll < 0.85:
                ops.append(("write", rng.choice(variables), rng.randrange(p["values"])))
            else:
                ops.append(("read", rng.choice(variables)))
        return ops

    def program(ops):
        def prog():
            for op in ops:
                yield op
        return prog

    workers = [program(plan()) for _ in range(k - 1)]
    main_ops = plan()

    def main():
        tids = []
        for w in workers:
            tids.append((yield ("fork", w)))
        for op in main_ops:
            yield op
        for t in tids:
            yield ("join", t)
    return main


_SCENARIOS = {
    "rw": Scenario("rw", {"readers": 2}, "1-writer 2-readers: a write, concurrent reads under a reader counter lock, a second write", _rw),
    "prods-cons": Scenario("prods-cons", {"producers": 2, "consumers": 2, "items": 3},
                           "producers and consumers sharing a lock-protected buffer", lambda p, r: _prods_cons(p, r)),
    "prods-cons-faulty": Scenario("prods-cons-faulty", {"producers": 2, "consumers": 2, "items": 3, "rogue": 1},
                                  "as prods-cons, but `rogue` consumers emit br/ar without taking the lock",
                                  lambda p, r: _prods_cons(p, r, faulty=True)),
    "bakery": Scenario("bakery", {"threads": 3, "iterations": 2},
                       "Lamport's bakery lock; synchronizes only through shared reads and writes",
                       lambda p, r: _bakery(p, r)),
    "bakery-faulty": Scenario("bakery-faulty", {"threads": 3, "iterations": 2, "rogue": 1},
                              "bakery where the last `rogue` threads enter the critical section without taking a ticket",
                              lambda p, r: _bakery(p, r, faulty=True)),
    "precedence-demo": Scenario("precedence-demo", {"sync": False},
                                "request r and grant g on two threads; ordered via notify/wait only when sync",
                                _precedence_demo),
    "response-between": Scenario("response-between", {"tasks": 1, "sync": False},
                                 "normal task window q..r with an urgent p/s on another thread (or nested via fork/join)",
                                 _response_between),
    "random": Scenario("random", {"threads": 3, "actions": 60, "labels": 3, "locks": 2,
                                  "rw": False, "variables": 2, "values": 2},
                       "random lock/fork/join programs, optionally with colliding reads/writes", _random),
}

_MEMORY = {"prods-cons": {"count": "0", "taken": "0"}, "prods-cons-faulty": {"count": "0", "taken": "0"}}


def list_scenarios() -> list[Scenario]:
    return list(_SCENARIOS.values())


def _coerce(name: str, default, value):
    if isinstance(value, str):
        if isinstance(default, bool):
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise BadParams(f"{name}: expected a boolean, got {value!r}")
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            try:
                return int(value)
            except ValueError:
                raise BadParams(f"{name}: expected an integer, got {value!r}") from None
        return value
    if isinstance(default, bool) and not isinstance(value, bool):
        raise BadParams(f"{name}: expected a boolean")
    if isinstance(default, int) and not isinstance(default, bool) and (isinstance(value, bool) or not isinstance(value, int)):
        raise BadParams(f"{name}: expected an integer")
    return value


def resolve_params(name: str, params: Optional[Mapping[str, Any]] = None) -> dict:
    if name not in _SCENARIOS:
        raise UnknownScenario(name)
    sc = _SCENARIOS[name]
    out = dict(sc.params)
    for k, v in (params or {}).items():
        if k not in out:
            raise BadParams(f"scenario {name!r} has no parameter {k!r}")
        out[k] = _coerce(k, out[k], v)
    for k, v in out.items():
        if isinstance(v, int) and not isinstance(v, bool) and v < 0:
            raise BadParams(f"{k} must be non-negative")
    if name == "random" and (out["threads"] < 1 or out["labels"] < 1):
        raise BadParams("random needs at least one thread and one label")
    if name == "random" and out["rw"] and (out["variables"] < 1 or out["values"] < 1):
        raise BadParams("rw mode needs variables and values")
    if out.get("rogue", 0) > out.get("consumers", out.get("threads", 0)):
        raise BadParams("more rogue threads than workers")
    if name == "rw" and out["readers"] < 1:
        raise BadParams("rw needs at least one reader")
    return out


def simulate(name: str, seed: int = 0, params: Optional[Mapping[str, Any]] = None) -> SimResult:
    """Run scenario ``name`` under a scheduler seeded with ``seed``."""
    p = resolve_params(name, params)
    rng = random.Random(seed)
    main = _SCENARIOS[name].build(p, rng)
    return Scheduler(rng, _MEMORY.get(name)).run(main)


def replay(stream: list[Action]) -> SimResult:
    """Wrap an ingested stream with reconstructed ground truth."""
    problems = validate_stream(stream)
    if problems:
        raise ContractViolation("; ".join(f"({v.rule}) {v.message}" for v in problems[:5]))
    return SimResult(list(stream), execution_from_stream(stream))


def synthetic_actions(n: int, threads: int = 8, seed: int = 0, locks: int = 4) -> list[Action]:
    """A legal stream of about ``n`` actions for throughput measurements.

    Thread 0 forks the others, everyone mixes regular events with
    lock-protected sections and shared writes/reads, and thread 0 joins
    everyone at the end. Built directly, without the scheduler.
    """
    rng = random.Random(seed)
    out: list[Action] = []
    idx = [0] * threads
    holder: dict[str, int] = {}
    inside: list[Optional[str]] = [None] * threads
    memory: dict[str, str] = {}

    def emit(t, kind, **kw):
        out.append(Action(len(out), t, kind, idx[t], **kw))
        idx[t] += 1

    for u in range(1, threads):
        emit(0, "fork", res=str(u))
        emit(u, "begin", res=str(u))
    body = max(0, n - len(out) - 3 * (threads - 1))
    lock_names = [f"l{i}" for i in range(locks)]
    rand, choice = rng.random, rng.choice
    while len(out) < body:
        t = rng.randrange(threads)
        held = inside[t]
        r = rand()
        if held is not None:
            if r < 0.6:
                emit(t, "regular", label="e")
            else:
                emit(t, "unlock", res=held)
                del holder[held]
                inside[t] = None
        elif r < 0.5:
            emit(t, "regular", label=choice("abcd"))
        elif r < 0.8:
            l = choice(lock_names)
            if l not in holder:
                holder[l] = t
                inside[t] = l
                emit(t, "lock", res=l)
        elif r < 0.9:
            v = str(rng.randrange(3))
            memory["x"] = v
            emit(t, "write", res="x", val=v)
        else:
            emit(t, "read", res="x", val=memory.get("x", "0"))
    for t in range(threads):
        if inside[t] is not None:
            emit(t, "unlock", res=inside[t])
    for u in range(1, threads):
        emit(u, "end", res=str(u))
        emit(0, "join", res=str(u))
    return out
