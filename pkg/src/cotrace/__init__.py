"""Vector-clock reordering and monitoring of concurrent event streams."""

from __future__ import annotations

from .dfa import (
    Dfa, InvalidDfa, NONE, VIOLATION, classical_monitorability, compute_independence,
    dependence, load_dfa, mutual_exclusion_p2, one_state, response_between_p1, save_dfa,
)
from .engine import ContractViolation, DecoupledEngine, VectorClockEngine, reorder
from .events import Action, TimestampedEvent, VectorClock, read_actions, read_events, validate_stream
from .monitor import StreamMonitor, linearize, monitor_stream, monitor_trace, t_mon, tno_check
from .order import (
    ConcurrentExecution, ConcurrentTrace, check_faithfulness, check_soundness, closure,
    execution_from_stream, execution_order, faithfulness_ratio, linear_trace, optimal_ratio,
    thread_order_trace,
)
from .patterns import PatternSpec, build_pattern, independence_stats, library
from .simulator import SimResult, list_scenarios, replay, simulate

__all__ = [
    "Action", "ConcurrentExecution", "ConcurrentTrace", "ContractViolation", "DecoupledEngine",
    "Dfa", "InvalidDfa", "NONE", "PatternSpec", "SimResult", "StreamMonitor", "TimestampedEvent",
    "VIOLATION", "VectorClock", "VectorClockEngine", "build_pattern", "check_faithfulness",
    "check_soundness", "classical_monitorability", "closure", "compute_independence", "dependence",
    "execution_from_stream", "execution_order", "faithfulness_ratio", "independence_stats",
    "library", "linear_trace", "linearize", "list_scenarios", "load_dfa", "monitor_stream",
    "monitor_trace", "mutual_exclusion_p2", "one_state", "optimal_ratio", "read_actions",
    "read_events", "reorder", "replay", "response_between_p1", "save_dfa", "simulate", "t_mon",
    "thread_order_trace", "tno_check", "validate_stream",
]
