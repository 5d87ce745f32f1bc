"""Tracing tree-walking interpreter for MiniLang.

Execution is fully deterministic: the same (program, inputs, step_budget)
always produces the same TraceLog. Runtime faults (division by zero, out of
bounds access, recursion too deep) and budget exhaustion never raise; they
are recorded in the trace's termination field.

One budget step is one statement execution or one loop-condition
evaluation. Integers wrap at 64 bits; division truncates toward zero;
uninitialized array elements read as 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .ast import FunctionDef, Node, NodeKind, Program

DEFAULT_STEP_BUDGET = 10_000
MAX_CALL_DEPTH = 64

TERM_NORMAL = "NORMAL"
TERM_BUDGET = "STEP_BUDGET_EXCEEDED"
TERM_FAULT = "RUNTIME_FAULT"

FAULT_DIV_ZERO = "division by zero"
FAULT_OOB = "index out of bounds"
FAULT_DEPTH = "recursion depth exceeded"

_U64 = 1 << 64
_BIAS = 1 << 63

Value = Union[int, list]
InputMap = dict[str, Value]


def wrap64(v: int) -> int:
    return (v + _BIAS) % _U64 - _BIAS


@dataclass
class TraceEvent:
    step: int
    line: int
    kind: str  # STMT|VAR_WRITE|BRANCH|LOOP_ITER_START|ARRAY_ACCESS|CALL|RETURN|OUTPUT|FAULT
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"step": self.step, "line": self.line, "kind": self.kind, "payload": self.payload}


@dataclass
class TraceLog:
    events: list[TraceEvent]
    termination: str
    inputs: InputMap
    step_budget: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "events": [e.to_dict() for e in self.events],
            "termination": self.termination,
            "inputs": self.inputs,
            "step_budget": self.step_budget,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TraceLog":
        events = [TraceEvent(**e) for e in data["events"]]
        return cls(events=events, termination=data["termination"],
                   inputs=data["inputs"], step_budget=data["step_budget"])

    def output_text(self) -> str:
        return "\n".join(e.payload["text"] for e in self.events if e.kind == "OUTPUT")


class _Fault(Exception):
    def __init__(self, reason: str, line: int):
        self.reason = reason
        self.line = line


class _BudgetExhausted(Exception):
    pass


class _Return(Exception):
    def __init__(self, value: int):
        self.value = value


@dataclass
class _Frame:
    fn: FunctionDef
    scopes: list[dict[str, Value]] = field(default_factory=list)

    def lookup(self, name: str) -> Value:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise KeyError(name)

    def set(self, name: str, value: Value) -> Value:
        for scope in reversed(self.scopes):
            if name in scope:
                old = scope[name]
                scope[name] = value
                return old
        raise KeyError(name)


def execute(program: Program, inputs: InputMap, step_budget: int = DEFAULT_STEP_BUDGET) -> TraceLog:
    """Run main with the given inputs and record the full trace.

    inputs must supply an int for every scalar parameter of main and a list
    of the declared length for every array parameter; a mismatch is a
    caller error and raises ValueError rather than producing a trace.
    """
    if step_budget < 1:
        raise ValueError("step_budget must be >= 1")
    main = program.main
    bound: InputMap = {}
    for param in main.params:
        if param.name not in inputs:
            raise ValueError(f"missing input for parameter {param.name}")
        value = inputs[param.name]
        if param.is_array:
            if not isinstance(value, list) or len(value) != param.size:
                raise ValueError(f"parameter {param.name} expects int[{param.size}]")
            bound[param.name] = [wrap64(int(v)) for v in value]
        else:
            if isinstance(value, list):
                raise ValueError(f"parameter {param.name} expects int")
            bound[param.name] = wrap64(int(value))

    machine = _Machine(program, step_budget)
    termination = TERM_NORMAL
    try:
        machine.call(main, [bound[p.name] for p in main.params], main.line)
    except _BudgetExhausted:
        termination = TERM_BUDGET
    except _Fault as fault:
        machine.emit(fault.line, "FAULT", {"reason": fault.reason})
        termination = TERM_FAULT
    return TraceLog(events=machine.events, termination=termination,
                    inputs=inputs, step_budget=step_budget)


class _Machine:
    def __init__(self, program: Program, step_budget: int):
        self.program = program
        self.functions = {fn.name: fn for fn in program.functions}
        self.step_budget = step_budget
        self.steps_used = 0
        self.events: list[TraceEvent] = []
        self.depth = 0

    def emit(self, line: int, kind: str, payload: dict[str, Any]) -> None:
        self.events.append(TraceEvent(step=len(self.events), line=line, kind=kind, payload=payload))

    def consume(self) -> None:
        if self.steps_used >= self.step_budget:
            raise _BudgetExhausted()
        self.steps_used += 1

    # calls ----------------------------------------------------------

    def call(self, fn: FunctionDef, args: list[Value], call_line: int) -> int:
        if self.depth >= MAX_CALL_DEPTH:
            raise _Fault(FAULT_DEPTH, call_line)
        self.depth += 1
        self.emit(call_line, "CALL", {"name": fn.name})
        frame = _Frame(fn=fn, scopes=[{}])
        for param, arg in zip(fn.params, args):
            value = list(arg) if isinstance(arg, list) else arg  # call by value
            frame.scopes[0][param.name] = value
            self.emit(fn.line, "VAR_WRITE", {"name": param.name, "old_value": None, "new_value": value})
        try:
            for stmt in fn.body:
                self.exec_stmt(stmt, frame)
        except _Return as ret:
            self.depth -= 1
            return ret.value
        # fell off the end: implicit return 0 charged to the closing brace
        self.consume()
        self.emit(fn.end_line, "RETURN", {"name": fn.name, "value": 0})
        self.depth -= 1
        return 0

    # statements -----------------------------------------------------

    def exec_stmt(self, stmt: Node, frame: _Frame) -> None:
        self.consume()
        self.emit(stmt.line, "STMT", {"node_id": stmt.node_id})
        kind = stmt.kind
        if kind == NodeKind.DECL:
            if stmt.size is not None:
                value: Value = [0] * stmt.size
            else:
                value = self.eval(stmt.init, frame)
            frame.scopes[-1][stmt.name] = value
            self.emit(stmt.line, "VAR_WRITE", {"name": stmt.name, "old_value": None, "new_value": value})
        elif kind == NodeKind.ASSIGN:
            value = self.eval(stmt.value_expr, frame)
            old = frame.set(stmt.name, value)
            self.emit(stmt.line, "VAR_WRITE", {"name": stmt.name, "old_value": old, "new_value": value})
        elif kind == NodeKind.ARRAY_ASSIGN:
            index = self.eval(stmt.index_expr, frame)
            value = self.eval(stmt.value_expr, frame)
            array = frame.lookup(stmt.name)
            in_bounds = 0 <= index < len(array)
            self.emit(stmt.line, "ARRAY_ACCESS", {"name": stmt.name, "index": index, "in_bounds": in_bounds})
            if not in_bounds:
                raise _Fault(FAULT_OOB, stmt.line)
            array[index] = value
        elif kind == NodeKind.IF:
            taken = self.eval(stmt.cond, frame)
            self.emit(stmt.line, "BRANCH", {"node_id": stmt.node_id, "taken": bool(taken)})
            arm = stmt.body if taken else (stmt.else_body or [])
            scope: dict[str, Value] = {}
            frame.scopes.append(scope)
            try:
                for s in arm:
                    self.exec_stmt(s, frame)
            finally:
                frame.scopes.pop()
        elif kind == NodeKind.WHILE:
            self.run_loop(stmt, frame, update=None)
        elif kind == NodeKind.FOR:
            frame.scopes.append({})
            try:
                self.exec_stmt(stmt.init, frame)
                self.run_loop(stmt, frame, update=stmt.update)
            finally:
                frame.scopes.pop()
        elif kind == NodeKind.PRINT:
            value = self.eval(stmt.expr, frame)
            self.emit(stmt.line, "OUTPUT", {"text": str(value)})
        elif kind == NodeKind.RETURN:
            value = self.eval(stmt.expr, frame)
            self.emit(stmt.line, "RETURN", {"name": frame.fn.name, "value": value})
            raise _Return(value)
        else:  # pragma: no cover - parser only produces statement kinds
            raise AssertionError(f"not a statement: {kind}")

    def run_loop(self, loop: Node, frame: _Frame, update: Optional[Node]) -> None:
        iteration = 0
        while True:
            self.consume()  # loop-condition evaluation is a budget step
            if not self.eval(loop.cond, frame):
                return
            self.emit(loop.line, "LOOP_ITER_START", {"node_id": loop.node_id, "iteration_index": iteration})
            iteration += 1
            frame.scopes.append({})
            try:
                for s in loop.body:
                    self.exec_stmt(s, frame)
            finally:
                frame.scopes.pop()
            if update is not None:
                self.exec_stmt(update, frame)

    # expressions ----------------------------------------------------

    def eval(self, expr: Node, frame: _Frame) -> Any:
        kind = expr.kind
        if kind == NodeKind.CONST:
            return expr.value
        if kind == NodeKind.VAR:
            return frame.lookup(expr.name)
        if kind == NodeKind.INDEX:
            index = self.eval(expr.index_expr, frame)
            array = frame.lookup(expr.name)
            in_bounds = 0 <= index < len(array)
            self.emit(expr.line, "ARRAY_ACCESS", {"name": expr.name, "index": index, "in_bounds": in_bounds})
            if not in_bounds:
                raise _Fault(FAULT_OOB, expr.line)
            return array[index]
        if kind == NodeKind.CALL:
            args = [self.eval(a, frame) for a in expr.args]
            return self.call(self.functions[expr.name], args, expr.line)
        if kind == NodeKind.UNOP:
            if expr.op == "-":
                return wrap64(-self.eval(expr.operand, frame))
            return not self.eval(expr.operand, frame)
        if kind == NodeKind.BINOP:
            op = expr.op
            if op == "&&":
                return bool(self.eval(expr.lhs, frame)) and bool(self.eval(expr.rhs, frame))
            if op == "||":
                return bool(self.eval(expr.lhs, frame)) or bool(self.eval(expr.rhs, frame))
            lhs = self.eval(expr.lhs, frame)
            rhs = self.eval(expr.rhs, frame)
            if op == "+":
                return wrap64(lhs + rhs)
            if op == "-":
                return wrap64(lhs - rhs)
            if op == "*":
                return wrap64(lhs * rhs)
            if op == "/":
                if rhs == 0:
                    raise _Fault(FAULT_DIV_ZERO, expr.line)
                return wrap64(_trunc_div(lhs, rhs))
            if op == "%":
                if rhs == 0:
                    raise _Fault(FAULT_DIV_ZERO, expr.line)
                return wrap64(lhs - _trunc_div(lhs, rhs) * rhs)
            if op == "==":
                return lhs == rhs
            if op == "!=":
                return lhs != rhs
            if op == "<":
                return lhs < rhs
            if op == "<=":
                return lhs <= rhs
            if op == ">":
                return lhs > rhs
            if op == ">=":
                return lhs >= rhs
        raise AssertionError(f"not an expression: {kind}")  # pragma: no cover


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q
