from __future__ import annotations

import itertools
import logging
import random

import pytest

from cotrace.events import REGULAR, Action
from cotrace.order import ConcurrentExecution


@pytest.fixture(autouse=True)
def _quiet_monitor_warnings():
    logging.getLogger("cotrace").setLevel(logging.ERROR)
    yield
    logging.getLogger("cotrace").setLevel(logging.NOTSET)


def naive_order(e: ConcurrentExecution) -> set[tuple[int, int]]:
    """Reachability by repeated DFS, written independently of the package."""
    succ = {s: [] for s in e.actions}
    for a, b in e.edges():
        succ[a].append(b)
    out = set()
    for start in succ:
        seen, stack = set(), list(succ[start])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(succ[n])
        out.update((start, n) for n in seen)
    return out


def regular_order(e: ConcurrentExecution) -> set[tuple[int, int]]:
    regs = {s for s, a in e.actions.items() if a.kind == REGULAR}
    return {(a, b) for a, b in naive_order(e) if a in regs and b in regs}


def random_poset(rng: random.Random, labels, n: int, threads: int = 3, p: float = 0.3) -> ConcurrentExecution:
    """Regular events spread over threads, plus random forward cross edges."""
    acts, idx = [], [0] * threads
    for s in range(n):
        t = rng.randrange(threads)
        acts.append(Action(s, t, REGULAR, idx[t], label=rng.choice(labels)))
        idx[t] += 1
    sync = {(a.seq, b.seq) for a, b in itertools.combinations(acts, 2) if a.tid != b.tid and rng.random() < p}
    return ConcurrentExecution({a.seq: a for a in acts}, sync)


def linear_extensions(nodes, order):
    """All topological orders of ``nodes`` under strict order ``order``."""
    preds = {n: {a for a, b in order if b == n} for n in nodes}

    def rec(done, left):
        if not left:
            yield list(done)
            return
        for n in sorted(left):
            if preds[n] <= set(done):
                done.append(n)
                left.remove(n)
                yield from rec(done, left)
                left.add(n)
                done.pop()

    yield from rec([], set(nodes))


ACCEPTANCE: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> None:
    """Record (and print) one acceptance line."""
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
