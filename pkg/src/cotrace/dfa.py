"""Bad-prefix automata and the causal independence relation they induce."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

VIOLATION = "violation"
NONE = "none"


class InvalidDfa(ValueError):
    pass


class UnknownSymbol(KeyError):
    pass


class UnknownState(KeyError):
    pass


class IndependenceRelation(frozenset):
    """Symbol pairs that may be permuted without changing the automaton state."""

    def off_diagonal(self) -> set[tuple[str, str]]:
        return {(a, b) for a, b in self if a != b}

    def to_json(self) -> list[list[str]]:
        return [list(p) for p in sorted(self)]


class DependenceRelation(frozenset):
    """Symbol pairs whose relative order matters to the automaton."""

    def to_json(self) -> list[list[str]]:
        return [list(p) for p in sorted(self)]


@dataclass(frozen=True)
class RunResult:
    state: str
    verdict: str


@dataclass(frozen=True, eq=False)
class Dfa:
    """Deterministic automaton with a total transition function.

    ``verdict`` states are absorbing and signal a violation.
    """

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    initial: str
    verdict: frozenset[str]
    delta: Mapping[tuple[str, str], str]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "verdict", frozenset(self.verdict))
        object.__setattr__(self, "delta", dict(self.delta))
        if len(set(self.alphabet)) != len(self.alphabet) or len(set(self.states)) != len(self.states):
            raise InvalidDfa("duplicate symbols or states")
        states = set(self.states)
        if self.initial not in states:
            raise InvalidDfa(f"initial state {self.initial!r} is not a state")
        if not self.verdict <= states:
            raise InvalidDfa(f"verdict states {sorted(self.verdict - states)} are not states")
        for q, a in product(self.states, self.alphabet):
            if (q, a) not in self.delta:
                raise InvalidDfa(f"missing transition from {q!r} on {a!r}")
            if self.delta[q, a] not in states:
                raise InvalidDfa(f"transition {q!r} -{a}-> {self.delta[q, a]!r} leaves the state set")
            if q in self.verdict and self.delta[q, a] != q:
                raise InvalidDfa(f"verdict state {q!r} is not absorbing on {a!r}")
        extra = {k for k in self.delta if k[0] not in states or k[1] not in self.alphabet}
        if extra:
            raise InvalidDfa(f"transitions on unknown states/symbols: {sorted(extra)}")

    @classmethod
    def from_table(cls, alphabet, initial, verdict, table: Mapping[str, Mapping[str, str]], name: str = "") -> "Dfa":
        """Build from ``{state: {symbol: target}}``; ``"*"`` covers unlisted symbols."""
        delta = {}
        for q, row in table.items():
            for a in alphabet:
                if a in row:
                    delta[q, a] = row[a]
                elif "*" in row:
                    delta[q, a] = row["*"]
        return cls(tuple(alphabet), tuple(table), initial, frozenset(verdict), delta, name)

    def step(self, q: str, a: str) -> str:
        try:
            return self.delta[q, a]
        except KeyError:
            if q not in self.states:
                raise UnknownState(q) from None
            raise UnknownSymbol(a) from None

    def run(self, word: Iterable[str], start: str | None = None) -> RunResult:
        q = self.initial if start is None else start
        delta = self.delta
        for a in word:
            try:
                q = delta[q, a]
            except KeyError:
                raise UnknownSymbol(a) from None
        return RunResult(q, VIOLATION if q in self.verdict else NONE)

    def reachable(self, start: str | None = None) -> set[str]:
        seen = {self.initial if start is None else start}
        todo = deque(seen)
        while todo:
            q = todo.popleft()
            for a in self.alphabet:
                r = self.delta[q, a]
                if r not in seen:
                    seen.add(r)
                    todo.append(r)
        return seen

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "states": list(self.states),
            "initial": self.initial,
            "verdict": sorted(self.verdict),
            "transitions": [
                {"from": q, "on": a, "to": self.delta[q, a]}
                for q in self.states for a in self.alphabet
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping, name: str = "") -> "Dfa":
        try:
            delta = {}
            for tr in obj["transitions"]:
                k = (str(tr["from"]), str(tr["on"]))
                if k in delta and delta[k] != str(tr["to"]):
                    raise InvalidDfa(f"nondeterministic transition from {k[0]!r} on {k[1]!r}")
                delta[k] = str(tr["to"])
            return cls(
                tuple(map(str, obj["alphabet"])),
                tuple(map(str, obj["states"])),
                str(obj["initial"]),
                frozenset(map(str, obj.get("verdict", ()))),
                delta,
                name,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidDfa(f"malformed DFA document: {exc!r}") from None


def step(d: Dfa, q: str, a: str) -> str:
    return d.step(q, a)


def run(d: Dfa, word: Sequence[str]) -> RunResult:
    return d.run(word)


def load_dfa(path) -> Dfa:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidDfa(f"{path}: {exc}") from None
    return Dfa.from_json(obj, name=str(path))


def save_dfa(d: Dfa, path) -> None:
    with open(path, "w") as fh:
        json.dump(d.to_json(), fh, indent=1)
        fh.write("\n")


def compute_independence(d: Dfa) -> IndependenceRelation:
    """Pairs (a, b) with delta*(q, ab) == delta*(q, ba) for every state q."""
    verdict: dict[tuple[str, str], bool] = {}
    delta = d.delta
    for a, b in product(d.alphabet, repeat=2):
        if (a, b) in verdict:
            continue
        if a == b:
            verdict[a, a] = True
            continue
        indep = True
        for q in d.states:
            if delta[delta[q, a], b] != delta[delta[q, b], a]:
                indep = False
                break
        verdict[a, b] = verdict[b, a] = indep
    return IndependenceRelation(p for p, ok in verdict.items() if ok)


def dependence(d: Dfa) -> DependenceRelation:
    indep = compute_independence(d)
    return DependenceRelation(
        (a, b) for a, b in product(d.alphabet, repeat=2) if a != b and (a, b) not in indep
    )


def classical_monitorability(d: Dfa) -> bool:
    """Every state reachable from the initial one can still reach a verdict."""
    if not d.verdict:
        return False
    # backwards reachability from verdict states
    pred: dict[str, set[str]] = {q: set() for q in d.states}
    for (q, _), r in d.delta.items():
        pred[r].add(q)
    can = set(d.verdict)
    todo = deque(can)
    while todo:
        q = todo.popleft()
        for p in pred[q]:
            if p not in can:
                can.add(p)
                todo.append(p)
    return d.reachable() <= can


def response_between_p1() -> Dfa:
    """``s`` responds to ``p`` between ``q`` and ``r``.

    ``q1`` outside a q..r window, ``q2`` inside with no pending ``p``,
    ``q3`` inside with a pending ``p``, ``err`` the violation sink.
    """
    return Dfa.from_table(
        ("p", "q", "r", "s"), "q1", {"err"},
        {
            "q1": {"q": "q2", "*": "q1"},
            "q2": {"r": "q1", "p": "q3", "*": "q2"},
            "q3": {"r": "err", "s": "q2", "*": "q3"},
            "err": {"*": "err"},
        },
        name="P1",
    )


def mutual_exclusion_p2() -> Dfa:
    """No read or write overlaps a write, with writes delimited by
    ``bw``/``aw`` and reads by ``br``/``ar``."""
    return Dfa.from_table(
        ("bw", "aw", "br", "ar"), "q1", {"q3"},
        {
            "q1": {"bw": "q2", "*": "q1"},
            "q2": {"aw": "q1", "*": "q3"},
            "q3": {"*": "q3"},
        },
        name="P2",
    )


def one_state(alphabet: Sequence[str] = ("a", "b")) -> Dfa:
    return Dfa.from_table(tuple(alphabet), "q0", (), {"q0": {"*": "q0"}}, name="one-state")


def equivalent(d1: Dfa, d2: Dfa) -> bool:
    """Language equivalence of two automata over the same alphabet
    (same violation prefixes)."""
    if set(d1.alphabet) != set(d2.alphabet):
        return False
    seen = {(d1.initial, d2.initial)}
    todo = deque(seen)
    while todo:
        p, q = todo.popleft()
        if (p in d1.verdict) != (q in d2.verdict):
            return False
        for a in d1.alphabet:
            nxt = (d1.delta[p, a], d2.delta[q, a])
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return True
