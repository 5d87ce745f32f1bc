"""Deterministic fact extraction: the ground truth every question is built on.

Static facts come from the syntax tree, dynamic facts from recorded runs
under sampled inputs, and logic units partition the executable statements
so questioning can target one region of the program at a time.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Any, Optional

from .minilang.ast import Node, NodeKind, Program
from .minilang.interp import (
    DEFAULT_STEP_BUDGET,
    TERM_BUDGET,
    TERM_FAULT,
    TERM_NORMAL,
    InputMap,
    TraceLog,
    execute,
)
from .minilang.queries import attribute_nontermination

# knowledge components trackable for MiniLang submissions
KC_LOOPS = "LOOPS"
KC_CONDITIONALS = "CONDITIONALS"
KC_ARRAYS = "ARRAYS"
KC_ARITHMETIC = "ARITHMETIC"
KC_TRACING = "TRACING"
KC_TERMINATION = "TERMINATION"
KC_FUNCTIONS = "FUNCTIONS"

# tie-break order used by the question-selection policy
KC_ORDER = (KC_LOOPS, KC_CONDITIONALS, KC_ARRAYS, KC_ARITHMETIC,
            KC_TRACING, KC_TERMINATION, KC_FUNCTIONS)

DEFAULT_INPUT_DOMAIN = (-8, 8)
DEFAULT_INPUT_SETS = 3

# at most this many BRANCH_TAKEN facts are kept per conditional per run
BRANCH_FACT_CAP = 8


class InvalidInputs(Exception):
    pass


@dataclass
class StaticFact:
    fact_id: str
    kind: str  # LOOP | CONDITIONAL | DECL | FUNCTION | ARRAY
    node_id: int
    line: int
    data: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"fact_id": self.fact_id, "kind": self.kind, "node_id": self.node_id,
                "line": self.line, "data": self.data}


@dataclass
class DynamicFact:
    fact_id: str
    kind: str  # ITERATIONS | FINAL_VALUE | VAR_BEFORE_FINAL_ITER | BRANCH_TAKEN |
    #            LAST_VALID_INDEX | OUTPUT | NONTERMINATION | FAULT
    node_id: int
    line: int
    input_set_id: str
    data: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"fact_id": self.fact_id, "kind": self.kind, "node_id": self.node_id,
                "line": self.line, "input_set_id": self.input_set_id, "data": self.data}


@dataclass
class LogicUnit:
    unit_id: str
    kind: str  # FUNCTION_BODY | LOOP_BODY | BRANCH_ARM
    node_ids: list[int]
    knowledge_components: set[str]
    function: str
    anchor_node_id: int            # the function/loop/if node the unit hangs off
    parent_unit_id: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {"unit_id": self.unit_id, "kind": self.kind, "node_ids": self.node_ids,
                "knowledge_components": sorted(self.knowledge_components),
                "function": self.function, "anchor_node_id": self.anchor_node_id,
                "parent_unit_id": self.parent_unit_id}


@dataclass
class CodeFacts:
    program: Program
    static_facts: list[StaticFact]
    dynamic_facts: list[DynamicFact]
    logic_units: list[LogicUnit]
    input_sets: dict[str, InputMap]
    per_input_runs: dict[str, TraceLog]
    step_budget: int = DEFAULT_STEP_BUDGET

    def to_dict(self) -> dict[str, Any]:
        return {
            "static_facts": [f.to_dict() for f in self.static_facts],
            "dynamic_facts": [f.to_dict() for f in self.dynamic_facts],
            "logic_units": [u.to_dict() for u in self.logic_units],
            "input_sets": self.input_sets,
            "per_input_runs": {k: v.to_dict() for k, v in self.per_input_runs.items()},
            "step_budget": self.step_budget,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def unit(self, unit_id: str) -> LogicUnit:
        for u in self.logic_units:
            if u.unit_id == unit_id:
                return u
        raise KeyError(unit_id)

    def statics_of_kind(self, kind: str) -> list[StaticFact]:
        return [f for f in self.static_facts if f.kind == kind]

    def dynamics_of_kind(self, kind: str) -> list[DynamicFact]:
        return [f for f in self.dynamic_facts if f.kind == kind]


# static extraction ------------------------------------------------------

def extract_static(program: Program) -> list[StaticFact]:
    """One LOOP fact per loop, one DECL per declaration, CONDITIONAL per if,
    FUNCTION per function, ARRAY per array declaration or array parameter."""
    raw: list[tuple[int, str, int, dict[str, Any]]] = []  # (line, kind, node_id, data)
    for fn in program.functions:
        raw.append((fn.line, "FUNCTION", fn.node_id, {"name": fn.name, "arity": len(fn.params)}))
        for param in fn.params:
            if param.is_array:
                raw.append((fn.line, "ARRAY", fn.node_id, {"name": param.name, "size": param.size}))
        for node in fn.walk():
            if node.kind == NodeKind.DECL:
                if node.size is not None:
                    raw.append((node.line, "DECL", node.node_id,
                                {"name": node.name, "type": f"int[{node.size}]"}))
                    raw.append((node.line, "ARRAY", node.node_id,
                                {"name": node.name, "size": node.size}))
                else:
                    raw.append((node.line, "DECL", node.node_id, {"name": node.name, "type": "int"}))
            elif node.kind == NodeKind.IF:
                raw.append((node.line, "CONDITIONAL", node.node_id,
                            {"cond_node": node.cond.node_id, "has_else": node.else_body is not None}))
            elif node.kind in (NodeKind.WHILE, NodeKind.FOR):
                raw.append((node.line, "LOOP", node.node_id, {
                    "loop_kind": node.kind.value,
                    "init_node": node.init.node_id if node.init else None,
                    "cond_node": node.cond.node_id,
                    "update_node": node.update.node_id if node.update else None,
                }))
    raw.sort(key=lambda r: (r[0], r[1], r[2], json.dumps(r[3], sort_keys=True)))
    return [StaticFact(fact_id=f"sf{i}", kind=kind, node_id=node_id, line=line, data=data)
            for i, (line, kind, node_id, data) in enumerate(raw)]


# dynamic extraction -----------------------------------------------------

def extract_dynamic(program: Program, input_sets: list[InputMap],
                    budget: int = DEFAULT_STEP_BUDGET) -> list[DynamicFact]:
    facts, _ = extract_dynamic_with_traces(program, input_sets, budget)
    return facts


def extract_dynamic_with_traces(
    program: Program, input_sets: list[InputMap], budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[list[DynamicFact], dict[str, TraceLog]]:
    """Run once per input set and emit every derivable fact kind per run."""
    _validate_inputs(program, input_sets)
    traces: dict[str, TraceLog] = {}
    raw: list[tuple[int, str, int, str, dict[str, Any]]] = []
    for index, inputs in enumerate(input_sets):
        set_id = f"in{index}"
        trace = execute(program, inputs, step_budget=budget)
        traces[set_id] = trace
        raw.extend(_facts_for_run(program, trace, set_id))
    raw.sort(key=lambda r: (r[0], r[1], r[2], r[3], json.dumps(r[4], sort_keys=True)))
    facts = [DynamicFact(fact_id=f"df{i}", line=line, kind=kind, node_id=node_id,
                         input_set_id=set_id, data=data)
             for i, (line, kind, node_id, set_id, data) in enumerate(raw)]
    return facts, traces


def _facts_for_run(program: Program, trace: TraceLog, set_id: str):
    out: list[tuple[int, str, int, str, dict[str, Any]]] = []
    events = trace.events

    iter_starts: dict[int, list[int]] = {}
    for e in events:
        if e.kind == "LOOP_ITER_START":
            iter_starts.setdefault(e.payload["node_id"], []).append(e.step)

    for loop in program.loops():
        starts = iter_starts.get(loop.node_id, [])
        out.append((loop.line, "ITERATIONS", loop.node_id, set_id,
                    {"loop_id": loop.node_id, "count": len(starts)}))
        if starts:
            for var in _cond_scalars(program, loop):
                value = _last_scalar_write_before(events, var, starts[-1])
                if value is not None:
                    out.append((loop.line, "VAR_BEFORE_FINAL_ITER", loop.node_id, set_id,
                                {"loop_id": loop.node_id, "var": var, "value": value}))

    # final value per scalar name: the last write wins
    final: dict[str, int] = {}
    for e in events:
        if e.kind == "VAR_WRITE" and not isinstance(e.payload["new_value"], list):
            final[e.payload["name"]] = e.payload["new_value"]
    for name in sorted(final):
        node_id, line = _declaration_site(program, name)
        out.append((line, "FINAL_VALUE", node_id, set_id, {"var": name, "value": final[name]}))

    branch_seen: dict[int, int] = {}
    for e in events:
        if e.kind == "BRANCH":
            node_id = e.payload["node_id"]
            occurrence = branch_seen.get(node_id, 0)
            branch_seen[node_id] = occurrence + 1
            if occurrence < BRANCH_FACT_CAP:
                out.append((e.line, "BRANCH_TAKEN", node_id, set_id,
                            {"node_id": node_id, "occurrence": occurrence,
                             "taken": e.payload["taken"]}))

    last_valid: dict[str, int] = {}
    for e in events:
        if e.kind == "ARRAY_ACCESS" and e.payload["in_bounds"]:
            last_valid[e.payload["name"]] = e.payload["index"]
    for name in sorted(last_valid):
        node_id, line = _declaration_site(program, name)
        out.append((line, "LAST_VALID_INDEX", node_id, set_id,
                    {"array": name, "index": last_valid[name]}))

    if trace.termination == TERM_NORMAL:
        text = trace.output_text()
        if text:
            main = program.main
            out.append((main.line, "OUTPUT", main.node_id, set_id, {"text": text}))

    if trace.termination == TERM_BUDGET:
        loop_id = attribute_nontermination(trace)
        if loop_id is not None:
            loop = program.node(loop_id)
            out.append((loop.line, "NONTERMINATION", loop_id, set_id,
                        {"loop_id": loop_id, "line": loop.line,
                         "stuck_vars": _stuck_condition_vars(program, loop)}))

    if trace.termination == TERM_FAULT:
        fault = events[-1]
        node_id = _statement_at_line(program, fault.line)
        out.append((fault.line, "FAULT", node_id, set_id,
                    {"reason": fault.payload["reason"], "line": fault.line}))
    return out


def _cond_scalars(program: Program, loop: Node) -> list[str]:
    arrays = program.array_names()
    names: list[str] = []
    for node in loop.cond.walk():
        if node.kind == NodeKind.VAR and node.name not in arrays and node.name not in names:
            names.append(node.name)
    return names


def _stuck_condition_vars(program: Program, loop: Node) -> list[str]:
    """Condition variables the loop body never writes: the usual culprits
    when a loop cannot make progress."""
    written: set[str] = set()
    nodes = list(loop.body)
    if loop.update is not None:
        nodes.append(loop.update)
    for stmt in nodes:
        for node in stmt.walk():
            if node.kind == NodeKind.ASSIGN:
                written.add(node.name)
    return [name for name in _cond_scalars(program, loop) if name not in written]


def _last_scalar_write_before(events, var: str, step: int) -> Optional[int]:
    value = None
    for e in events:
        if e.step >= step:
            break
        if e.kind == "VAR_WRITE" and e.payload["name"] == var:
            new = e.payload["new_value"]
            if not isinstance(new, list):
                value = new
    return value


def _declaration_site(program: Program, name: str) -> tuple[int, int]:
    for fn in program.functions:
        for param in fn.params:
            if param.name == name:
                return fn.node_id, fn.line
    for fn in program.functions:
        for node in fn.walk():
            if node.kind == NodeKind.DECL and node.name == name:
                return node.node_id, node.line
    main = program.main
    return main.node_id, main.line


def _statement_at_line(program: Program, line: int) -> int:
    from .minilang.ast import STATEMENT_KINDS
    for node in program.walk():
        if node.line == line and node.kind in STATEMENT_KINDS:
            return node.node_id
    for node in program.walk():
        if node.line == line:
            return node.node_id
    return program.main.node_id


def _validate_inputs(program: Program, input_sets: list[InputMap]) -> None:
    for index, inputs in enumerate(input_sets):
        for param in program.main.params:
            if param.name not in inputs:
                raise InvalidInputs(f"input set {index} omits parameter {param.name}")


# logic-unit decomposition ----------------------------------------------

_INCREMENT_OPS = {"+", "-"}


def decompose(program: Program) -> list[LogicUnit]:
    """Partition executable statements into innermost function/loop/branch units."""
    units: list[LogicUnit] = []
    counter = 0

    def new_unit(kind: str, fn_name: str, anchor: int, parent: Optional[str]) -> LogicUnit:
        nonlocal counter
        unit = LogicUnit(unit_id=f"u{counter}", kind=kind, node_ids=[],
                         knowledge_components=set(), function=fn_name,
                         anchor_node_id=anchor, parent_unit_id=parent)
        counter += 1
        units.append(unit)
        return unit

    for fn in program.functions:
        fn_unit = new_unit("FUNCTION_BODY", fn.name, fn.node_id, None)
        fn_unit.knowledge_components.update({KC_FUNCTIONS, KC_TRACING})
        _assign(fn.body, fn_unit, fn.name, new_unit)

    return units


def _assign(stmts: list[Node], unit: LogicUnit, fn_name: str, new_unit) -> None:
    for stmt in stmts:
        unit.node_ids.append(stmt.node_id)
        if stmt.kind in (NodeKind.WHILE, NodeKind.FOR):
            loop_unit = new_unit("LOOP_BODY", fn_name, stmt.node_id, unit.unit_id)
            loop_unit.knowledge_components.update({KC_LOOPS, KC_TRACING})
            _scan_exprs([stmt.cond], loop_unit)
            if stmt.kind == NodeKind.FOR:
                loop_unit.node_ids.append(stmt.init.node_id)
                _scan_stmt_exprs(stmt.init, loop_unit)
                loop_unit.node_ids.append(stmt.update.node_id)
                _scan_stmt_exprs(stmt.update, loop_unit)
            _assign(stmt.body, loop_unit, fn_name, new_unit)
        elif stmt.kind == NodeKind.IF:
            _scan_exprs([stmt.cond], unit)
            then_unit = new_unit("BRANCH_ARM", fn_name, stmt.node_id, unit.unit_id)
            then_unit.knowledge_components.update({KC_CONDITIONALS, KC_TRACING})
            _assign(stmt.body, then_unit, fn_name, new_unit)
            if stmt.else_body is not None:
                else_unit = new_unit("BRANCH_ARM", fn_name, stmt.node_id, unit.unit_id)
                else_unit.knowledge_components.update({KC_CONDITIONALS, KC_TRACING})
                _assign(stmt.else_body, else_unit, fn_name, new_unit)
        else:
            _scan_stmt_exprs(stmt, unit)


def _scan_stmt_exprs(stmt: Node, unit: LogicUnit) -> None:
    if stmt.kind == NodeKind.DECL:
        if stmt.size is not None:
            unit.knowledge_components.add(KC_ARRAYS)
        if stmt.init is not None:
            _scan_exprs([stmt.init], unit)
    elif stmt.kind == NodeKind.ASSIGN:
        if not _is_increment(stmt):
            _scan_exprs([stmt.value_expr], unit)
    elif stmt.kind == NodeKind.ARRAY_ASSIGN:
        unit.knowledge_components.add(KC_ARRAYS)
        _scan_exprs([stmt.index_expr, stmt.value_expr], unit)
    elif stmt.kind in (NodeKind.PRINT, NodeKind.RETURN):
        _scan_exprs([stmt.expr], unit)


def _is_increment(stmt: Node) -> bool:
    """x = x + 1 / x = x - 1 count as loop bookkeeping, not arithmetic."""
    expr = stmt.value_expr
    if expr is None or expr.kind != NodeKind.BINOP or expr.op not in _INCREMENT_OPS:
        return False
    lhs, rhs = expr.lhs, expr.rhs
    return (lhs.kind == NodeKind.VAR and lhs.name == stmt.name
            and rhs.kind == NodeKind.CONST and rhs.value == 1)


def _scan_exprs(exprs: list[Node], unit: LogicUnit) -> None:
    for expr in exprs:
        if expr is None:
            continue
        for node in expr.walk():
            if node.kind == NodeKind.INDEX:
                unit.knowledge_components.add(KC_ARRAYS)
            elif node.kind == NodeKind.CALL:
                unit.knowledge_components.add(KC_FUNCTIONS)
            elif node.kind == NodeKind.BINOP and node.op in ("+", "-", "*", "/", "%"):
                unit.knowledge_components.add(KC_ARITHMETIC)


# input sampling ---------------------------------------------------------

def sample_inputs(program: Program, seed: int, count: int,
                  domain: tuple[int, int] = DEFAULT_INPUT_DOMAIN) -> list[InputMap]:
    """Deterministic input sets for main; identical seeds yield identical lists."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    low, high = domain
    sets: list[InputMap] = []
    for _ in range(count):
        one: InputMap = {}
        for param in program.main.params:
            if param.is_array:
                one[param.name] = [rng.randint(low, high) for _ in range(param.size)]
            else:
                one[param.name] = rng.randint(low, high)
        sets.append(one)
    return sets


# assembly ---------------------------------------------------------------

def build_facts(program: Program, input_sets: Optional[list[InputMap]] = None,
                seed: int = 0, input_count: int = DEFAULT_INPUT_SETS,
                domain: tuple[int, int] = DEFAULT_INPUT_DOMAIN,
                budget: int = DEFAULT_STEP_BUDGET) -> CodeFacts:
    """Full extraction pipeline: sample inputs, run, and collect everything.

    Units covering a loop that some run failed to leave gain the
    TERMINATION component so the selection policy can probe it.
    """
    if input_sets is None:
        input_sets = sample_inputs(program, seed=seed, count=input_count, domain=domain)
    static_facts = extract_static(program)
    dynamic_facts, traces = extract_dynamic_with_traces(program, input_sets, budget)
    units = decompose(program)

    runaway_loops = {f.data["loop_id"] for f in dynamic_facts if f.kind == "NONTERMINATION"}
    for unit in units:
        if unit.kind == "LOOP_BODY" and unit.anchor_node_id in runaway_loops:
            unit.knowledge_components.add(KC_TERMINATION)

    return CodeFacts(
        program=program,
        static_facts=static_facts,
        dynamic_facts=dynamic_facts,
        logic_units=units,
        input_sets={f"in{i}": s for i, s in enumerate(input_sets)},
        per_input_runs=traces,
        step_budget=budget,
    )
