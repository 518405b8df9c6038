from __future__ import annotations

import itertools

import pytest

from cotrace.dfa import VIOLATION, classical_monitorability, compute_independence, dependence, equivalent, response_between_p1
from cotrace.patterns import PATTERNS, SCOPES, PatternSpec, UnsupportedCombination, build_pattern, independence_stats, library


def _windows(spec: PatternSpec, word):
    """(contents, closed) for every scope window opened in ``word``."""
    n = len(spec.symbols) - {"global": 0, "before-r": 1, "after-q": 1, "between-q-and-r": 2}[spec.scope]
    scope = spec.symbols[n:]
    if spec.scope == "global":
        return [(list(word), False)]
    if spec.scope == "before-r":
        r = scope[0]
        if r in word:
            return [(list(word[: word.index(r)]), True)]
        return [(list(word), False)]
    if spec.scope == "after-q":
        q = scope[0]
        if q not in word:
            return []
        return [([a for a in word[word.index(q) + 1:] if a != q], False)]
    q, r = scope
    out, cur = [], None
    for a in word:
        if cur is None:
            if a == q:
                cur = []
        elif a == r:
            out.append((cur, True))
            cur = None
        elif a != q:
            cur.append(a)
    if cur is not None:
        out.append((cur, False))
    return out


def _subseq_end(u, x, y, start=0):
    """Index just past the first x...y subsequence in u[start:], or None."""
    seen_x = False
    for i in range(start, len(u)):
        if u[i] == x:
            seen_x = True
        elif u[i] == y and seen_x:
            return i + 1
    return None


def _window_bad(pattern, syms, u, closed):
    if pattern == "absence":
        return syms[0] in u
    if pattern == "existence":
        return closed and syms[0] not in u
    if pattern == "precedence":
        s, p = syms
        return p in u and (s not in u or u.index(p) < u.index(s))
    if pattern == "response":
        p, s = syms
        return closed and any(a == p and s not in u[i + 1:] for i, a in enumerate(u))
    if pattern == "precedence-chain-2":
        s, t, p = syms
        end = _subseq_end(u, s, t)
        limit = len(u) if end is None else end
        return p in u[:limit]
    p, s, t = syms
    return closed and any(a == p and _subseq_end(u, s, t, i + 1) is None for i, a in enumerate(u))


def oracle_bad(spec: PatternSpec, word) -> bool:
    """Some prefix of ``word`` already violates the property."""
    n = {"absence": 1, "existence": 1}.get(spec.pattern, 2 if spec.pattern in ("precedence", "response") else 3)
    for k in range(len(word) + 1):
        if any(_window_bad(spec.pattern, spec.symbols[:n], u, c) for u, c in _windows(spec, word[:k])):
            return True
    return False


@pytest.mark.parametrize("spec", library(), ids=lambda s: s.name)
def test_automaton_matches_word_semantics(spec):
    d = build_pattern(spec)
    for n in range(6):
        for w in itertools.product(spec.symbols, repeat=n):
            assert (d.run(w).verdict == VIOLATION) == oracle_bad(spec, w), w


def test_library_covers_every_combination():
    lib = library()
    assert len(lib) == len(PATTERNS) * len(SCOPES) == 24
    assert len({s.name for s in lib}) == 24


def test_response_between_matches_hand_written_automaton():
    d = build_pattern(PatternSpec("response", "between-q-and-r", ("p", "s", "q", "r")))
    assert equivalent(d, response_between_p1())


def test_precedence_spot_checks():
    d = build_pattern(PatternSpec("precedence"))
    assert ("s", "p") in dependence(d)
    d = build_pattern(PatternSpec("precedence", "before-r"))
    assert ("s", "r") in compute_independence(d)


def test_custom_symbols_and_name():
    spec = PatternSpec("response", "global", ("req", "ack"))
    assert spec.name == "response[req,ack]/global"
    assert build_pattern(spec).alphabet == ("req", "ack")


@pytest.mark.parametrize("args", [
    ("eventually", "global", ()),
    ("absence", "forever", ()),
    ("response", "global", ("p",)),
    ("response", "global", ("p", "p")),
])
def test_unsupported_combinations(args):
    with pytest.raises(UnsupportedCombination):
        PatternSpec(*args)


def test_liveness_style_combinations_have_no_verdict_state():
    for pattern in ("existence", "response", "response-chain-2"):
        for scope in ("global", "after-q"):
            d = build_pattern(PatternSpec(pattern, scope))
            assert not d.verdict and not classical_monitorability(d)


def test_independence_stats_shape():
    stats = independence_stats(library())
    assert set(stats) == {(p, k) for p, k in stats}
    assert all(0.0 <= v <= 100.0 for v in stats.values())
    # single-letter absence/existence alphabets are skipped
    assert ("absence", 1) not in stats and ("absence", 2) in stats
    assert independence_stats([response_between_p1()]) == {("P1", 4): pytest.approx(100 * 2 / 12)}
