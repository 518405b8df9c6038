"""Dwyer-style specification patterns compiled to bad-prefix automata.

A pattern is a small machine over its own symbols; a scope decides when
that machine is active. "between q and r" opens a window at ``q`` and
closes it at ``r``, at which point any pending obligation (an unanswered
response, a missing existence) becomes a violation.

Symbol order per pattern::

    absence            [p]          p never occurs
    existence          [p]          p occurs
    precedence         [s, p]       s precedes p
    response           [p, s]       s responds to p
    precedence-chain-2 [s, t, p]    s followed by t precedes p
    response-chain-2   [p, s, t]    s followed by t responds to p

followed by the scope symbols: ``[r]`` for before-r, ``[q]`` for after-q,
``[q, r]`` for between-q-and-r.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Union

from .dfa import Dfa, compute_independence

PATTERNS = ("absence", "existence", "precedence", "response", "precedence-chain-2", "response-chain-2")
SCOPES = ("global", "before-r", "after-q", "between-q-and-r")

_ARITY = {"absence": 1, "existence": 1, "precedence": 2, "response": 2,
          "precedence-chain-2": 3, "response-chain-2": 3}
_SCOPE_ARITY = {"global": 0, "before-r": 1, "after-q": 1, "between-q-and-r": 2}
_DEFAULT_SYMBOLS = {"absence": ["p"], "existence": ["p"], "precedence": ["s", "p"],
                    "response": ["p", "s"], "precedence-chain-2": ["s", "t", "p"],
                    "response-chain-2": ["p", "s", "t"]}
_DEFAULT_SCOPE_SYMBOLS = {"global": [], "before-r": ["r"], "after-q": ["q"], "between-q-and-r": ["q", "r"]}

_VIOL = "VIOL"


class UnsupportedCombination(ValueError):
    pass


@dataclass(frozen=True)
class PatternSpec:
    pattern: str
    scope: str = "global"
    symbols: tuple[str, ...] = ()

    def __post_init__(self):
        if self.pattern not in _ARITY or self.scope not in _SCOPE_ARITY:
            raise UnsupportedCombination(f"{self.pattern!r} / {self.scope!r}")
        syms = tuple(self.symbols) or tuple(_DEFAULT_SYMBOLS[self.pattern] + _DEFAULT_SCOPE_SYMBOLS[self.scope])
        object.__setattr__(self, "symbols", syms)
        want = _ARITY[self.pattern] + _SCOPE_ARITY[self.scope]
        if len(syms) != want:
            raise UnsupportedCombination(f"{self.pattern}/{self.scope} takes {want} symbols, got {len(syms)}")
        if len(set(syms)) != len(syms):
            raise UnsupportedCombination(f"symbols must be distinct: {syms}")

    @property
    def name(self) -> str:
        return f"{self.pattern}[{','.join(self.symbols)}]/{self.scope}"


# Pattern machines: step(state, role) -> state | _VIOL, and whether a state
# still owes something when the scope closes.
def _absence(q, role):
    return _VIOL


def _existence(q, role):
    return 1


def _precedence(q, role):
    if role == 0:
        return 1
    return _VIOL if q == 0 else q


def _response(q, role):
    return 1 if role == 0 else 0


def _precedence_chain(q, role):
    if q == 2:
        return 2
    if role == 2:
        return _VIOL
    if role == 0:
        return 1
    return 2 if q == 1 else 0


def _response_chain(q, role):
    if role == 0:
        return 1
    if role == 1:
        return 2 if q == 1 else q
    return 0 if q == 2 else q


_MACHINES = {
    "absence": (_absence, lambda q: False),
    "existence": (_existence, lambda q: q == 0),
    "precedence": (_precedence, lambda q: False),
    "response": (_response, lambda q: q == 1),
    "precedence-chain-2": (_precedence_chain, lambda q: False),
    "response-chain-2": (_response_chain, lambda q: q != 0),
}


def build_pattern(spec: PatternSpec) -> Dfa:
    """Compile a pattern/scope combination to a bad-prefix DFA.

    Liveness-style combinations without a closing scope (e.g. global
    existence) have no bad prefix; their automaton has no verdict state.
    """
    step, pending = _MACHINES[spec.pattern]
    n = _ARITY[spec.pattern]
    roles = {s: i for i, s in enumerate(spec.symbols[:n])}
    scope_syms = spec.symbols[n:]
    opener = closer = None
    if spec.scope == "before-r":
        closer = scope_syms[0]
    elif spec.scope == "after-q":
        opener = scope_syms[0]
    elif spec.scope == "between-q-and-r":
        opener, closer = scope_syms

    # node: _VIOL | ("wait",) | ("open", pattern_state) | ("done",)
    def nxt(node, a):
        if node == _VIOL or node == ("done",):
            return node
        if node == ("wait",):
            return ("open", 0) if a == opener else node
        q = node[1]
        if a == closer:
            if pending(q):
                return _VIOL
            return ("wait",) if spec.scope == "between-q-and-r" else ("done",)
        if a == opener:
            return node
        r = step(q, roles[a])
        return _VIOL if r == _VIOL else ("open", r)

    start = ("wait",) if opener is not None else ("open", 0)
    names = {start: "q0"}
    order = [start]
    todo = deque(order)
    delta_nodes = {}
    while todo:
        node = todo.popleft()
        for a in spec.symbols:
            m = nxt(node, a)
            if m not in names:
                names[m] = "err" if m == _VIOL else f"q{len(names) - (1 if _VIOL in names else 0)}"
                order.append(m)
                todo.append(m)
            delta_nodes[node, a] = m
    delta = {(names[x], a): names[y] for (x, a), y in delta_nodes.items()}
    verdict = {"err"} if _VIOL in names else set()
    return Dfa(spec.symbols, tuple(names[x] for x in order), "q0", verdict, delta, name=spec.name)


def library() -> list[PatternSpec]:
    """Every pattern under every scope, with default symbols."""
    return [PatternSpec(p, s) for p in PATTERNS for s in SCOPES]


def independence_stats(specs: Iterable[Union[PatternSpec, Dfa]]) -> dict[tuple[str, int], float]:
    """Mean percentage of off-diagonal independent pairs per (pattern, |alphabet|).

    Single-letter alphabets are skipped; plain automata are grouped under
    their ``name``.
    """
    groups: dict[tuple[str, int], list[float]] = defaultdict(list)
    for item in specs:
        if isinstance(item, PatternSpec):
            d, group = build_pattern(item), item.pattern
        else:
            d, group = item, item.name
        k = len(d.alphabet)
        if k < 2:
            continue
        off = compute_independence(d).off_diagonal()
        groups[group, k].append(100.0 * len(off) / (k * k - k))
    return {key: sum(v) / len(v) for key, v in sorted(groups.items())}
