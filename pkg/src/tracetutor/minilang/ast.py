"""Syntax tree for MiniLang, the small imperative language submissions are written in."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional


class NodeKind(str, Enum):
    DECL = "DECL"
    ASSIGN = "ASSIGN"
    ARRAY_ASSIGN = "ARRAY_ASSIGN"
    IF = "IF"
    WHILE = "WHILE"
    FOR = "FOR"
    PRINT = "PRINT"
    RETURN = "RETURN"
    CALL = "CALL"
    BINOP = "BINOP"
    UNOP = "UNOP"
    VAR = "VAR"
    CONST = "CONST"
    INDEX = "INDEX"


STATEMENT_KINDS = {
    NodeKind.DECL,
    NodeKind.ASSIGN,
    NodeKind.ARRAY_ASSIGN,
    NodeKind.IF,
    NodeKind.WHILE,
    NodeKind.FOR,
    NodeKind.PRINT,
    NodeKind.RETURN,
}

LOOP_KINDS = {NodeKind.WHILE, NodeKind.FOR}


@dataclass
class Node:
    """One syntax tree node.

    node_ids are assigned in parse order, so re-parsing identical source
    yields identical ids. Kind-specific slots stay None when unused.
    """

    node_id: int
    kind: NodeKind
    line: int
    name: Optional[str] = None          # DECL/ASSIGN/ARRAY_ASSIGN/VAR/CALL/INDEX
    value: Optional[int] = None         # CONST
    op: Optional[str] = None            # BINOP/UNOP
    size: Optional[int] = None          # array DECL
    init: Optional["Node"] = None       # DECL initializer, FOR init statement
    cond: Optional["Node"] = None       # IF/WHILE/FOR condition
    update: Optional["Node"] = None     # FOR update statement
    index_expr: Optional["Node"] = None  # ARRAY_ASSIGN/INDEX
    value_expr: Optional["Node"] = None  # ASSIGN/ARRAY_ASSIGN right-hand side
    expr: Optional["Node"] = None       # PRINT/RETURN argument
    lhs: Optional["Node"] = None        # BINOP
    rhs: Optional["Node"] = None        # BINOP
    operand: Optional["Node"] = None    # UNOP
    args: list["Node"] = field(default_factory=list)       # CALL
    body: list["Node"] = field(default_factory=list)       # IF then / WHILE / FOR
    else_body: Optional[list["Node"]] = None                # IF

    @property
    def children(self) -> list["Node"]:
        out: list[Node] = []
        for slot in (self.init, self.cond, self.update, self.index_expr,
                     self.value_expr, self.expr, self.lhs, self.rhs, self.operand):
            if slot is not None:
                out.append(slot)
        out.extend(self.args)
        out.extend(self.body)
        if self.else_body:
            out.extend(self.else_body)
        return out

    def walk(self) -> Iterator["Node"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class Param:
    name: str
    size: Optional[int] = None  # None for scalar int, N for int[N]

    @property
    def is_array(self) -> bool:
        return self.size is not None


@dataclass
class FunctionDef:
    node_id: int
    name: str
    params: list[Param]
    body: list[Node]
    line: int
    end_line: int  # closing brace; the line an implicit return is charged to

    def walk(self) -> Iterator[Node]:
        for stmt in self.body:
            yield from stmt.walk()


@dataclass
class Program:
    functions: list[FunctionDef]
    entry: str
    source_lines: list[str]  # 1-indexed via source_lines[line - 1]

    def function(self, name: str) -> FunctionDef:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)

    @property
    def main(self) -> FunctionDef:
        return self.function(self.entry)

    def walk(self) -> Iterator[Node]:
        for fn in self.functions:
            yield from fn.walk()

    def node(self, node_id: int) -> Node:
        for n in self.walk():
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def declared_names(self) -> set[str]:
        names: set[str] = set()
        for fn in self.functions:
            names.update(p.name for p in fn.params)
            for n in fn.walk():
                if n.kind == NodeKind.DECL:
                    names.add(n.name)
        return names

    def array_names(self) -> set[str]:
        names: set[str] = set()
        for fn in self.functions:
            names.update(p.name for p in fn.params if p.is_array)
            for n in fn.walk():
                if n.kind == NodeKind.DECL and n.size is not None:
                    names.add(n.name)
        return names

    def loops(self) -> list[Node]:
        return [n for n in self.walk() if n.kind in LOOP_KINDS]


def render_expr(node: Node) -> str:
    """Render an expression subtree back to canonical source text."""
    k = node.kind
    if k == NodeKind.CONST:
        return str(node.value)
    if k == NodeKind.VAR:
        return node.name or ""
    if k == NodeKind.INDEX:
        return f"{node.name}[{render_expr(node.index_expr)}]"
    if k == NodeKind.CALL:
        return f"{node.name}({', '.join(render_expr(a) for a in node.args)})"
    if k == NodeKind.UNOP:
        inner = render_expr(node.operand)
        if node.operand.kind == NodeKind.BINOP:
            inner = f"({inner})"
        return f"{node.op}{inner}"
    if k == NodeKind.BINOP:
        lhs, rhs = render_expr(node.lhs), render_expr(node.rhs)
        if node.lhs.kind == NodeKind.BINOP and _prec(node.lhs.op) < _prec(node.op):
            lhs = f"({lhs})"
        if node.rhs.kind == NodeKind.BINOP and _prec(node.rhs.op) <= _prec(node.op):
            rhs = f"({rhs})"
        return f"{lhs} {node.op} {rhs}"
    if k == NodeKind.ASSIGN:
        return f"{node.name} = {render_expr(node.value_expr)}"
    if k == NodeKind.DECL:
        if node.size is not None:
            return f"int[{node.size}] {node.name}"
        return f"int {node.name} = {render_expr(node.init)}"
    raise ValueError(f"not renderable as an expression: {k}")


_PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}


def _prec(op: Optional[str]) -> int:
    return _PRECEDENCE.get(op or "", 7)
