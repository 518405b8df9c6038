from __future__ import annotations

import io

import pytest
from hypothesis import given, strategies as st

from cotrace.events import (
    Action, BadKind, KINDS, MalformedLine, MissingField, REGULAR, TimestampedEvent, VectorClock,
    parse_action_line, parse_event_line, read_actions, regular_only, serialize_action,
    serialize_event, validate_stream, write_actions,
)
from cotrace.simulator import simulate

clocks = st.dictionaries(st.integers(0, 5), st.integers(1, 9), max_size=6).map(VectorClock)


def _action(draw_kind, tid, idx, seq=0):
    if draw_kind == REGULAR:
        return Action(seq, tid, REGULAR, idx, label="a")
    if draw_kind in ("read", "write"):
        return Action(seq, tid, draw_kind, idx, res="x", val="1")
    return Action(seq, tid, draw_kind, idx, res="1")


@given(st.sampled_from(sorted(KINDS)), st.integers(0, 50), st.integers(0, 50), st.integers(0, 10**6))
def test_action_round_trip(kind, tid, idx, seq):
    a = _action(kind, tid, idx, seq)
    assert parse_action_line(serialize_action(a)) == a


@given(clocks)
def test_event_round_trip(vc):
    ev = TimestampedEvent(Action(3, 1, REGULAR, 0, label="w"), vc)
    back = parse_event_line(serialize_event(ev))
    assert back == ev
    assert back.vc.leq(vc) and vc.leq(back.vc)


def test_wire_format_is_compact_and_ordered():
    a = Action(0, 0, "lock", 0, res="s")
    assert serialize_action(a) == '{"seq":0,"tid":0,"kind":"lock","res":"s","idx":0}'


def test_begin_and_end_default_to_own_thread():
    a = parse_action_line('{"seq":4,"tid":2,"kind":"begin","idx":0}')
    assert a.res == "2"


@pytest.mark.parametrize("line, exc", [
    ("{not json", MalformedLine),
    ("[1, 2]", MalformedLine),
    ('{"seq":0,"tid":0,"idx":0}', MissingField),
    ('{"seq":0,"tid":0,"kind":"lock","idx":0}', MissingField),
    ('{"seq":0,"tid":0,"kind":"write","res":"x","idx":0}', MissingField),
    ('{"seq":0,"tid":0,"kind":"regular","idx":0}', MissingField),
    ('{"seq":0,"tid":0,"kind":"spin","idx":0}', BadKind),
    ('{"seq":"a","tid":0,"kind":"regular","label":"a","idx":0}', MalformedLine),
])
def test_parse_errors(line, exc):
    with pytest.raises(exc):
        parse_action_line(line)


def test_unknown_fields_are_ignored():
    a = parse_action_line('{"seq":0,"tid":0,"kind":"regular","label":"a","idx":0,"extra":1}')
    assert a.label == "a"


def test_event_line_needs_a_clock():
    with pytest.raises(MissingField):
        parse_event_line('{"seq":0,"tid":0,"kind":"regular","label":"a","idx":0}')


@given(clocks, clocks, clocks)
def test_clock_order_is_a_preorder_and_join_is_lub(a, b, c):
    assert a.leq(a)
    if a.leq(b) and b.leq(c):
        assert a.leq(c)
    j = a.copy().join(b)
    assert a.leq(j) and b.leq(j)
    if a.leq(c) and b.leq(c):
        assert j.leq(c)


def test_join_with_none_and_copy_independence():
    a = VectorClock({0: 1})
    assert a.join(None) == {0: 1}
    b = a.copy()
    b[0] = 5
    assert a[0] == 1
    assert VectorClock({0: 1}).concurrent(VectorClock({1: 1}))


def test_resource_namespaces_are_distinct():
    assert Action(0, 0, "lock", 0, res="1").key != Action(1, 0, "fork", 1, res="1").key
    assert Action(0, 0, "notify", 0, res="1").key == Action(1, 1, "wait", 0, res="1").key


def test_simulated_streams_validate_and_round_trip():
    for name in ("rw", "prods-cons", "bakery", "precedence-demo"):
        stream = simulate(name, 5).stream
        assert validate_stream(stream) == []
        buf = io.StringIO()
        write_actions(stream, buf)
        assert read_actions(io.StringIO(buf.getvalue())) == stream


def test_validate_stream_rules():
    begin_unforked = [Action(0, 1, "begin", 0, res="1")]
    assert {v.rule for v in validate_stream(begin_unforked)} == {"e"}
    gap = [Action(0, 0, REGULAR, 1, label="a")]
    assert {v.rule for v in validate_stream(gap)} == {"a"}
    early_join = [Action(0, 0, "fork", 0, res="1"), Action(1, 0, "join", 1, res="1")]
    assert {v.rule for v in validate_stream(early_join)} == {"d"}
    after_end = [
        Action(0, 0, "fork", 0, res="1"), Action(1, 1, "begin", 0, res="1"),
        Action(2, 1, "end", 1, res="1"), Action(3, 1, REGULAR, 2, label="a"),
    ]
    assert {v.rule for v in validate_stream(after_end)} == {"c"}
    late_begin = [Action(0, 0, "fork", 0, res="1"), Action(1, 1, REGULAR, 0, label="a"), Action(2, 1, "begin", 1)]
    assert "b" in {v.rule for v in validate_stream(late_begin)}
    backwards = [Action(1, 0, REGULAR, 0, label="a"), Action(0, 0, REGULAR, 1, label="a")]
    assert {v.rule for v in validate_stream(backwards)} == {"order"}


def test_regular_only_renumbers_per_thread():
    stream = simulate("rw", 0).stream
    regs = regular_only(stream)
    assert all(a.kind == REGULAR for a in regs)
    assert validate_stream(regs) == []
