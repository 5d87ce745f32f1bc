"""Structured queries over recorded traces.

Every question the engine asks is grounded through one of these queries, so
they double as the oracle when checking generated questions for soundness.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Union

from .ast import NodeKind, Program
from .interp import TERM_BUDGET, TraceEvent, TraceLog


class _NotApplicable:
    def __repr__(self) -> str:
        return "NOT_APPLICABLE"

    def __bool__(self) -> bool:
        return False


NOT_APPLICABLE = _NotApplicable()

QUERY_KINDS = {
    "VAR_BEFORE_FINAL_ITER",   # {loop_id, var}
    "ITER_COUNT",              # {loop_id}
    "VALUE_AT_STEP",           # {var, step}
    "NEXT_WRITE_AFTER",        # {var, step}
    "LAST_VALID_ARRAY_INDEX",  # {name}
    "BRANCH_OUTCOME",          # {node_id, occurrence}
    "FINAL_OUTPUT",            # {}
    "NONTERMINATING_LOOP_LINE",  # {}
}

# window inspected when attributing a budget-exceeded run to one loop
NONTERMINATION_WINDOW = 100


class InvalidQuery(Exception):
    pass


@dataclass
class TraceQuery:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.params}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TraceQuery":
        return cls(kind=data["kind"], params=dict(data["params"]))


Answer = Union[int, str, bool, _NotApplicable]


def query_trace(program: Program, trace: TraceLog, query: TraceQuery) -> Answer:
    """Answer a query against one recorded run.

    Raises InvalidQuery when the query names a node or identifier that does
    not exist in the program; returns NOT_APPLICABLE when the program is
    fine but the trace lacks the queried event.
    """
    kind = query.kind
    if kind not in QUERY_KINDS:
        raise InvalidQuery(f"unknown query kind {kind!r}")
    p = query.params

    if kind == "VAR_BEFORE_FINAL_ITER":
        loop = _require_loop(program, p["loop_id"])
        _require_var(program, p["var"])
        starts = [e for e in trace.events
                  if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop.node_id]
        if not starts:
            return NOT_APPLICABLE
        return _value_before_step(trace.events, p["var"], starts[-1].step)

    if kind == "ITER_COUNT":
        loop = _require_loop(program, p["loop_id"])
        return sum(1 for e in trace.events
                   if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop.node_id)

    if kind == "VALUE_AT_STEP":
        _require_var(program, p["var"])
        step = p["step"]
        if step < 0 or step >= len(trace.events):
            return NOT_APPLICABLE
        value = _last_write(trace.events, p["var"], lambda s: s <= step)
        return NOT_APPLICABLE if value is None else value

    if kind == "NEXT_WRITE_AFTER":
        _require_var(program, p["var"])
        step = p["step"]
        for e in trace.events:
            if e.kind == "VAR_WRITE" and e.payload["name"] == p["var"] and e.step > step:
                return e.payload["new_value"]
        return NOT_APPLICABLE

    if kind == "LAST_VALID_ARRAY_INDEX":
        if p["name"] not in program.array_names():
            raise InvalidQuery(f"{p['name']} is not an array in the program")
        last = None
        for e in trace.events:
            if e.kind == "ARRAY_ACCESS" and e.payload["name"] == p["name"] and e.payload["in_bounds"]:
                last = e.payload["index"]
        return NOT_APPLICABLE if last is None else last

    if kind == "BRANCH_OUTCOME":
        node = _require_node(program, p["node_id"])
        if node.kind != NodeKind.IF:
            raise InvalidQuery(f"node {p['node_id']} is not a conditional")
        occurrences = [e for e in trace.events
                       if e.kind == "BRANCH" and e.payload["node_id"] == node.node_id]
        if p["occurrence"] < 0 or p["occurrence"] >= len(occurrences):
            return NOT_APPLICABLE
        return occurrences[p["occurrence"]].payload["taken"]

    if kind == "FINAL_OUTPUT":
        return trace.output_text()

    if kind == "NONTERMINATING_LOOP_LINE":
        if trace.termination != TERM_BUDGET:
            return NOT_APPLICABLE
        loop_id = attribute_nontermination(trace)
        if loop_id is None:
            return NOT_APPLICABLE
        return program.node(loop_id).line

    raise InvalidQuery(kind)  # pragma: no cover


def attribute_nontermination(trace: TraceLog) -> int | None:
    """Pick the loop responsible for a budget-exceeded run.

    The loop whose iteration starts dominate the trailing window is blamed;
    exact for single-loop programs, a reasonable guess otherwise.
    """
    window = trace.events[-NONTERMINATION_WINDOW:]
    counts = Counter(e.payload["node_id"] for e in window if e.kind == "LOOP_ITER_START")
    if not counts:
        counts = Counter(e.payload["node_id"] for e in trace.events if e.kind == "LOOP_ITER_START")
        if not counts:
            return None
    best = max(counts.items(), key=lambda item: (item[1], -item[0]))
    return best[0]


def _value_before_step(events: list[TraceEvent], var: str, step: int) -> Answer:
    value = _last_write(events, var, lambda s: s < step)
    return NOT_APPLICABLE if value is None else value


def _last_write(events: list[TraceEvent], var: str, accept) -> Any | None:
    value = None
    for e in events:
        if e.kind == "VAR_WRITE" and e.payload["name"] == var and accept(e.step):
            value = e.payload["new_value"]
    return value


def _require_loop(program: Program, loop_id: int):
    node = _require_node(program, loop_id)
    if node.kind not in (NodeKind.WHILE, NodeKind.FOR):
        raise InvalidQuery(f"node {loop_id} is not a loop")
    return node


def _require_node(program: Program, node_id: int):
    try:
        return program.node(node_id)
    except KeyError:
        raise InvalidQuery(f"node {node_id} does not exist in the program") from None


def _require_var(program: Program, name: str) -> None:
    if name not in program.declared_names():
        raise InvalidQuery(f"identifier {name} does not exist in the program")
