"""Command line front end: simulate, reorder, check, independence, monitor,
oracle-diff, and a helper to write automata files.

Reports go to stdout as JSON; a one-line summary goes to stderr.

Exit codes: 0 success (for ``monitor``: verdict none and trace-monitorable),
1 I/O error, 2 invalid input (contract violation, malformed stream or
automaton), 3 violation verdict, 4 trace not monitorable.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from typing import Optional, Sequence

from .dfa import (
    VIOLATION, Dfa, InvalidDfa, compute_independence, load_dfa, mutual_exclusion_p2, one_state,
    response_between_p1,
)
from .engine import ContractViolation, reorder
from .events import StreamError, read_actions, read_events, write_actions, write_events
from .monitor import monitor_trace
from .order import (
    ConcurrentExecution, ConcurrentTrace, check_faithfulness, check_soundness, execution_from_stream,
    faithfulness_ratio,
)
from .patterns import PatternSpec, UnsupportedCombination, build_pattern
from .simulator import BadParams, UnknownScenario, list_scenarios, simulate

log = logging.getLogger("cotrace")

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_VIOLATION, EXIT_NOT_MONITORABLE = 0, 1, 2, 3, 4

_BUILTIN_DFAS = {"p1": response_between_p1, "p2": mutual_exclusion_p2, "one-state": one_state}


class InputError(Exception):
    """Bad user input that should exit with code 2."""


def _setup_logging() -> None:
    level = os.environ.get("COTRACE_LOG", "WARNING").upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = logging.getLevelName(level)
        if not isinstance(lvl, int):
            lvl = logging.WARNING
    logging.basicConfig(level=lvl, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


@contextlib.contextmanager
def _open_in(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdin
    else:
        with open(path) as fh:
            yield fh


@contextlib.contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _emit(obj) -> None:
    json.dump(obj, sys.stdout)
    sys.stdout.write("\n")


def _summary(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_params(text: Optional[str]) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise InputError(f"bad --params entry {item!r}, expected key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_ground_truth(path: str) -> ConcurrentExecution:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from None
    try:
        return ConcurrentExecution.from_json(obj)
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_simulate(args) -> int:
    if args.list:
        _emit([{"name": s.name, "params": s.params, "description": s.description} for s in list_scenarios()])
        return EXIT_OK
    if not args.scenario:
        raise InputError("--scenario is required")
    try:
        res = simulate(args.scenario, args.seed, _parse_params(args.params))
    except UnknownScenario:
        raise InputError(f"unknown scenario {args.scenario!r}") from None
    except BadParams as exc:
        raise InputError(str(exc)) from None
    with _open_out(args.out) as fh:
        write_actions(res.stream, fh)
    if args.ground_truth:
        with open(args.ground_truth, "w") as fh:
            json.dump(res.ground_truth.to_json(), fh)
            fh.write("\n")
    _summary(f"{args.scenario} seed {args.seed}: {len(res.stream)} actions")
    return EXIT_OK


def cmd_reorder(args) -> int:
    with _open_in(args.inp) as fh:
        actions = read_actions(fh)
    trace = reorder(actions, mode=args.mode)
    with _open_out(args.out) as fh:
        write_events(trace.events, fh)
    _summary(f"{len(actions)} actions -> {len(trace)} timestamped events ({args.mode})")
    return EXIT_OK


def cmd_check(args) -> int:
    with _open_in(args.inp) as fh:
        trace = ConcurrentTrace(read_events(fh))
    e = _load_ground_truth(args.ground_truth)
    snd = check_soundness(e, trace)
    fth = check_faithfulness(e, trace)
    ratio = faithfulness_ratio(e, trace) if snd.holds else None
    _emit({
        "sound": snd.holds,
        "faithful": fth.holds,
        "ratio": None if ratio is None else str(ratio),
        "ratio_value": None if ratio is None else float(ratio),
        "violations": [list(p) for p in snd.violations],
        "missing": [list(p) for p in fth.missing],
        "unknown_events": snd.unknown_events,
    })
    _summary(f"sound={snd.holds} faithful={fth.holds} ratio={ratio}")
    return EXIT_OK


def cmd_independence(args) -> int:
    d = load_dfa(args.dfa)
    indep = compute_independence(d)
    off = sorted(indep.off_diagonal())
    k = len(d.alphabet)
    pct = 100.0 if k < 2 else 100.0 * len(off) / (k * k - k)
    _emit({
        "alphabet": list(d.alphabet),
        "independence": indep.to_json(),
        "off_diagonal": [list(p) for p in off],
        "percentage": pct,
    })
    _summary(f"{len(off)} of {k * k - k} off-diagonal pairs independent ({pct:.1f}%)")
    return EXIT_OK


def cmd_monitor(args) -> int:
    with _open_in(args.inp) as fh:
        trace = ConcurrentTrace(read_events(fh))
    d = load_dfa(args.dfa)
    soundness = _load_ground_truth(args.ground_truth) if args.ground_truth else "by-construction"
    rep = monitor_trace(d, trace, slice_key=args.slice_key, soundness=soundness)
    _emit(rep.to_json())
    _summary(f"verdict={rep.verdict} t_mon={rep.t_mon} warnings={len(rep.warnings)}")
    if not rep.t_mon:
        return EXIT_NOT_MONITORABLE
    if rep.verdict == VIOLATION:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_oracle_diff(args) -> int:
    with _open_in(args.inp) as fh:
        actions = read_actions(fh)
    trace = reorder(actions)
    e = execution_from_stream(actions)
    oracle = e.order_over(trace.by_seq)
    engine = trace.order()
    _emit({
        "oracle_minus_engine": sorted(map(list, oracle - engine)),
        "engine_minus_oracle": sorted(map(list, engine - oracle)),
    })
    _summary(f"oracle-engine: {len(oracle - engine)} pairs, engine-oracle: {len(engine - oracle)} pairs")
    return EXIT_OK


def cmd_dfa(args) -> int:
    if args.builtin:
        d: Dfa = _BUILTIN_DFAS[args.builtin]()
    elif args.pattern:
        syms = tuple(s for s in (args.symbols or "").split(",") if s)
        try:
            d = build_pattern(PatternSpec(args.pattern, args.scope, syms))
        except UnsupportedCombination as exc:
            raise InputError(str(exc)) from None
    else:
        raise InputError("give --builtin or --pattern")
    with _open_out(args.out) as fh:
        json.dump(d.to_json(), fh, indent=1)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cotrace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its action stream")
    p.add_argument("--scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="comma separated key=value overrides")
    p.add_argument("--out")
    p.add_argument("--ground-truth", help="also write the execution (actions and edges) here")
    p.add_argument("--list", action="store_true", help="list scenarios and exit")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reorder", help="timestamp a stream with vector clocks")
    p.add_argument("--in", dest="inp")
    p.add_argument("--out")
    p.add_argument("--mode", choices=("inline", "decoupled"), default="inline")
    p.set_defaults(func=cmd_reorder)

    p = sub.add_parser("check", help="soundness and faithfulness of a trace against ground truth")
    p.add_argument("--in", dest="inp")
    p.add_argument("--ground-truth", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("independence", help="independence relation of an automaton")
    p.add_argument("--dfa", required=True)
    p.set_defaults(func=cmd_independence)

    p = sub.add_parser("monitor", help="monitor a timestamped trace")
    p.add_argument("--in", dest="inp")
    p.add_argument("--dfa", required=True)
    p.add_argument("--slice-key", choices=("res", "tid", "label", "val"))
    p.add_argument("--ground-truth", help="check soundness against this execution instead of assuming it")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("oracle-diff", help="compare engine order with the closure oracle")
    p.add_argument("--in", dest="inp")
    p.set_defaults(func=cmd_oracle_diff)

    p = sub.add_parser("dfa", help="write a built-in or pattern automaton as JSON")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builtin", choices=sorted(_BUILTIN_DFAS))
    g.add_argument("--pattern")
    p.add_argument("--scope", default="global")
    p.add_argument("--symbols")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dfa)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractViolation, StreamError, InvalidDfa, InputError) as exc:
        _summary(f"error: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        _summary(f"error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
