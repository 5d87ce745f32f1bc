"""Recursive-descent parser and semantic checker for MiniLang.

Grammar summary:

    program   := function+
    function  := "int" IDENT "(" [param ("," param)*] ")" block
    param     := "int" ["[" NUMBER "]"] IDENT
    block     := "{" stmt* "}"
    stmt      := decl | if | while | for | print | return | assign
    decl      := "int" IDENT "=" expr ";"  |  "int" "[" NUMBER "]" IDENT ";"
    assign    := IDENT "=" expr ";"  |  IDENT "[" expr "]" "=" expr ";"
    for       := "for" "(" (decl-head | assign-head) ";" expr ";" assign-head ")" block

Expressions use C precedence over + - * / % == != < <= > >= && || !.
Conditions must be boolean; everywhere else expressions must be integers.
"""
from __future__ import annotations

from .ast import FunctionDef, Node, NodeKind, Param, Program
from .errors import ParseError, SemanticError
from .lexer import Token, tokenize


def parse(source: str) -> Program:
    """Parse and semantically check MiniLang source.

    Raises ParseError on syntax violations and SemanticError on scope or
    type violations (undeclared identifier, duplicate declaration,
    int vs int[] mismatches, missing or duplicate main).
    """
    parser = _Parser(tokenize(source))
    functions = parser.parse_program()
    program = Program(functions=functions, entry="main", source_lines=source.splitlines())
    _check_semantics(program)
    return program


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.next_id = 0

    # token plumbing -------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def check(self, type_: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.type == type_ and (value is None or tok.value == value)

    def expect(self, type_: str, value: str | None = None) -> Token:
        tok = self.peek()
        if not self.check(type_, value):
            want = value if value is not None else type_
            raise ParseError(
                f"expected {want!r}, found {tok.value!r}" if tok.value else f"expected {want!r}",
                tok.line, tok.col, expected={want},
            )
        return self.advance()

    def make(self, kind: NodeKind, line: int, **slots) -> Node:
        node = Node(node_id=self.next_id, kind=kind, line=line, **slots)
        self.next_id += 1
        return node

    # declarations ---------------------------------------------------

    def parse_program(self) -> list[FunctionDef]:
        functions = [self.parse_function()]
        while not self.check("eof"):
            functions.append(self.parse_function())
        return functions

    def parse_function(self) -> FunctionDef:
        fn_id = self.next_id
        self.next_id += 1
        start = self.expect("kw", "int")
        name = self.expect("ident").value
        self.expect("op", "(")
        params: list[Param] = []
        if not self.check("op", ")"):
            params.append(self.parse_param())
            while self.check("op", ","):
                self.advance()
                params.append(self.parse_param())
        self.expect("op", ")")
        body, end_line = self.parse_block()
        return FunctionDef(node_id=fn_id, name=name, params=params, body=body,
                           line=start.line, end_line=end_line)

    def parse_param(self) -> Param:
        self.expect("kw", "int")
        size = None
        if self.check("op", "["):
            self.advance()
            size = int(self.expect("number").value)
            self.expect("op", "]")
        name = self.expect("ident").value
        return Param(name=name, size=size)

    def parse_block(self) -> tuple[list[Node], int]:
        self.expect("op", "{")
        stmts: list[Node] = []
        while not self.check("op", "}"):
            stmts.append(self.parse_statement())
        close = self.expect("op", "}")
        return stmts, close.line

    # statements -----------------------------------------------------

    def parse_statement(self) -> Node:
        tok = self.peek()
        if tok.type == "kw":
            if tok.value == "int":
                node = self.parse_decl_head()
                self.expect("op", ";")
                return node
            if tok.value == "if":
                return self.parse_if()
            if tok.value == "while":
                return self.parse_while()
            if tok.value == "for":
                return self.parse_for()
            if tok.value == "print":
                self.advance()
                self.expect("op", "(")
                expr = self.parse_expr()
                self.expect("op", ")")
                self.expect("op", ";")
                return self.make(NodeKind.PRINT, tok.line, expr=expr)
            if tok.value == "return":
                self.advance()
                expr = self.parse_expr()
                self.expect("op", ";")
                return self.make(NodeKind.RETURN, tok.line, expr=expr)
            raise ParseError(f"unexpected keyword {tok.value!r}", tok.line, tok.col,
                             expected={"int", "if", "while", "for", "print", "return"})
        if tok.type == "ident":
            node = self.parse_assign_head()
            self.expect("op", ";")
            return node
        raise ParseError(f"expected a statement, found {tok.value!r}", tok.line, tok.col,
                         expected={"statement"})

    def parse_decl_head(self) -> Node:
        """Declaration without the trailing semicolon (shared with for-init)."""
        start = self.expect("kw", "int")
        if self.check("op", "["):
            self.advance()
            size_tok = self.expect("number")
            size = int(size_tok.value)
            if size < 1:
                raise ParseError("array size must be at least 1", size_tok.line, size_tok.col)
            self.expect("op", "]")
            name = self.expect("ident").value
            return self.make(NodeKind.DECL, start.line, name=name, size=size)
        name = self.expect("ident").value
        self.expect("op", "=")
        init = self.parse_expr()
        return self.make(NodeKind.DECL, start.line, name=name, init=init)

    def parse_assign_head(self) -> Node:
        """Assignment without the trailing semicolon (shared with for-update)."""
        name_tok = self.expect("ident")
        if self.check("op", "["):
            self.advance()
            index_expr = self.parse_expr()
            self.expect("op", "]")
            self.expect("op", "=")
            value = self.parse_expr()
            return self.make(NodeKind.ARRAY_ASSIGN, name_tok.line, name=name_tok.value,
                             index_expr=index_expr, value_expr=value)
        self.expect("op", "=")
        value = self.parse_expr()
        return self.make(NodeKind.ASSIGN, name_tok.line, name=name_tok.value, value_expr=value)

    def parse_if(self) -> Node:
        start = self.expect("kw", "if")
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        body, _ = self.parse_block()
        else_body = None
        if self.check("kw", "else"):
            self.advance()
            if self.check("kw", "if"):
                else_body = [self.parse_if()]
            else:
                else_body, _ = self.parse_block()
        return self.make(NodeKind.IF, start.line, cond=cond, body=body, else_body=else_body)

    def parse_while(self) -> Node:
        start = self.expect("kw", "while")
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        body, _ = self.parse_block()
        return self.make(NodeKind.WHILE, start.line, cond=cond, body=body)

    def parse_for(self) -> Node:
        start = self.expect("kw", "for")
        self.expect("op", "(")
        if self.check("kw", "int"):
            init = self.parse_decl_head()
        else:
            init = self.parse_assign_head()
        self.expect("op", ";")
        cond = self.parse_expr()
        self.expect("op", ";")
        update = self.parse_assign_head()
        self.expect("op", ")")
        body, _ = self.parse_block()
        return self.make(NodeKind.FOR, start.line, init=init, cond=cond, update=update, body=body)

    # expressions ----------------------------------------------------

    def parse_expr(self) -> Node:
        return self.parse_or()

    def parse_or(self) -> Node:
        node = self.parse_and()
        while self.check("op", "||"):
            op = self.advance()
            rhs = self.parse_and()
            node = self.make(NodeKind.BINOP, op.line, op="||", lhs=node, rhs=rhs)
        return node

    def parse_and(self) -> Node:
        node = self.parse_equality()
        while self.check("op", "&&"):
            op = self.advance()
            rhs = self.parse_equality()
            node = self.make(NodeKind.BINOP, op.line, op="&&", lhs=node, rhs=rhs)
        return node

    def parse_equality(self) -> Node:
        node = self.parse_relational()
        while self.peek().type == "op" and self.peek().value in ("==", "!="):
            op = self.advance()
            rhs = self.parse_relational()
            node = self.make(NodeKind.BINOP, op.line, op=op.value, lhs=node, rhs=rhs)
        return node

    def parse_relational(self) -> Node:
        node = self.parse_additive()
        while self.peek().type == "op" and self.peek().value in ("<", "<=", ">", ">="):
            op = self.advance()
            rhs = self.parse_additive()
            node = self.make(NodeKind.BINOP, op.line, op=op.value, lhs=node, rhs=rhs)
        return node

    def parse_additive(self) -> Node:
        node = self.parse_multiplicative()
        while self.peek().type == "op" and self.peek().value in ("+", "-"):
            op = self.advance()
            rhs = self.parse_multiplicative()
            node = self.make(NodeKind.BINOP, op.line, op=op.value, lhs=node, rhs=rhs)
        return node

    def parse_multiplicative(self) -> Node:
        node = self.parse_unary()
        while self.peek().type == "op" and self.peek().value in ("*", "/", "%"):
            op = self.advance()
            rhs = self.parse_unary()
            node = self.make(NodeKind.BINOP, op.line, op=op.value, lhs=node, rhs=rhs)
        return node

    def parse_unary(self) -> Node:
        tok = self.peek()
        if tok.type == "op" and tok.value in ("!", "-"):
            self.advance()
            operand = self.parse_unary()
            return self.make(NodeKind.UNOP, tok.line, op=tok.value, operand=operand)
        return self.parse_primary()

    def parse_primary(self) -> Node:
        tok = self.peek()
        if tok.type == "number":
            self.advance()
            return self.make(NodeKind.CONST, tok.line, value=int(tok.value))
        if tok.type == "ident":
            self.advance()
            if self.check("op", "("):
                self.advance()
                args: list[Node] = []
                if not self.check("op", ")"):
                    args.append(self.parse_expr())
                    while self.check("op", ","):
                        self.advance()
                        args.append(self.parse_expr())
                self.expect("op", ")")
                return self.make(NodeKind.CALL, tok.line, name=tok.value, args=args)
            if self.check("op", "["):
                self.advance()
                index_expr = self.parse_expr()
                self.expect("op", "]")
                return self.make(NodeKind.INDEX, tok.line, name=tok.value, index_expr=index_expr)
            return self.make(NodeKind.VAR, tok.line, name=tok.value)
        if tok.type == "op" and tok.value == "(":
            self.advance()
            node = self.parse_expr()
            self.expect("op", ")")
            return node
        raise ParseError(f"expected an expression, found {tok.value!r}", tok.line, tok.col,
                         expected={"expression"})


# semantic analysis ------------------------------------------------------

_INT = "int"
_BOOL = "bool"

_ARITH_OPS = {"+", "-", "*", "/", "%"}
_CMP_OPS = {"==", "!=", "<", "<=", ">", ">="}
_LOGIC_OPS = {"&&", "||"}


def _check_semantics(program: Program) -> None:
    seen: dict[str, FunctionDef] = {}
    for fn in program.functions:
        if fn.name in seen:
            raise SemanticError(f"duplicate function {fn.name}", fn.line)
        seen[fn.name] = fn
    if "main" not in seen:
        raise SemanticError("no main function", program.functions[0].line)
    for fn in program.functions:
        _check_function(fn, seen)


class _Scope:
    def __init__(self, parent: "_Scope | None" = None):
        self.parent = parent
        self.vars: dict[str, str | int] = {}  # name -> "int" or array size

    def declare(self, name: str, type_: str | int, line: int) -> None:
        if name in self.vars:
            raise SemanticError(f"duplicate declaration {name}", line)
        self.vars[name] = type_

    def lookup(self, name: str) -> str | int | None:
        scope: _Scope | None = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            scope = scope.parent
        return None


def _check_function(fn: FunctionDef, functions: dict[str, FunctionDef]) -> None:
    scope = _Scope()
    for p in fn.params:
        scope.declare(p.name, p.size if p.is_array else _INT, fn.line)
    for stmt in fn.body:
        _check_stmt(stmt, scope, functions)


def _check_stmt(stmt: Node, scope: _Scope, functions: dict[str, FunctionDef]) -> None:
    kind = stmt.kind
    if kind == NodeKind.DECL:
        if stmt.size is not None:
            scope.declare(stmt.name, stmt.size, stmt.line)
        else:
            _expect_type(stmt.init, _INT, scope, functions)
            scope.declare(stmt.name, _INT, stmt.line)
    elif kind == NodeKind.ASSIGN:
        declared = scope.lookup(stmt.name)
        if declared is None:
            raise SemanticError(f"undeclared identifier {stmt.name}", stmt.line)
        if declared != _INT:
            raise SemanticError(f"type mismatch int vs int[] for {stmt.name}", stmt.line)
        _expect_type(stmt.value_expr, _INT, scope, functions)
    elif kind == NodeKind.ARRAY_ASSIGN:
        declared = scope.lookup(stmt.name)
        if declared is None:
            raise SemanticError(f"undeclared identifier {stmt.name}", stmt.line)
        if declared == _INT:
            raise SemanticError(f"type mismatch int vs int[] for {stmt.name}", stmt.line)
        _expect_type(stmt.index_expr, _INT, scope, functions)
        _expect_type(stmt.value_expr, _INT, scope, functions)
    elif kind == NodeKind.IF:
        _expect_type(stmt.cond, _BOOL, scope, functions)
        body_scope = _Scope(scope)
        for s in stmt.body:
            _check_stmt(s, body_scope, functions)
        if stmt.else_body is not None:
            else_scope = _Scope(scope)
            for s in stmt.else_body:
                _check_stmt(s, else_scope, functions)
    elif kind == NodeKind.WHILE:
        _expect_type(stmt.cond, _BOOL, scope, functions)
        body_scope = _Scope(scope)
        for s in stmt.body:
            _check_stmt(s, body_scope, functions)
    elif kind == NodeKind.FOR:
        header_scope = _Scope(scope)
        _check_stmt(stmt.init, header_scope, functions)
        _expect_type(stmt.cond, _BOOL, header_scope, functions)
        _check_stmt(stmt.update, header_scope, functions)
        body_scope = _Scope(header_scope)
        for s in stmt.body:
            _check_stmt(s, body_scope, functions)
    elif kind in (NodeKind.PRINT, NodeKind.RETURN):
        _expect_type(stmt.expr, _INT, scope, functions)
    else:
        raise SemanticError(f"unexpected statement kind {kind}", stmt.line)


def _expect_type(expr: Node, want: str, scope: _Scope, functions: dict[str, FunctionDef]) -> None:
    got = _type_of(expr, scope, functions)
    if got != want:
        raise SemanticError(f"type mismatch: expected {want}, found {got}", expr.line)


def _type_of(expr: Node, scope: _Scope, functions: dict[str, FunctionDef]) -> str:
    kind = expr.kind
    if kind == NodeKind.CONST:
        return _INT
    if kind == NodeKind.VAR:
        declared = scope.lookup(expr.name)
        if declared is None:
            raise SemanticError(f"undeclared identifier {expr.name}", expr.line)
        return _INT if declared == _INT else "int[]"
    if kind == NodeKind.INDEX:
        declared = scope.lookup(expr.name)
        if declared is None:
            raise SemanticError(f"undeclared identifier {expr.name}", expr.line)
        if declared == _INT:
            raise SemanticError(f"type mismatch int vs int[] for {expr.name}", expr.line)
        _expect_type(expr.index_expr, _INT, scope, functions)
        return _INT
    if kind == NodeKind.CALL:
        fn = functions.get(expr.name)
        if fn is None:
            raise SemanticError(f"undeclared identifier {expr.name}", expr.line)
        if len(expr.args) != len(fn.params):
            raise SemanticError(
                f"{expr.name} expects {len(fn.params)} arguments, got {len(expr.args)}", expr.line)
        for arg, param in zip(expr.args, fn.params):
            arg_type = _type_of(arg, scope, functions)
            want = f"int[{param.size}]" if param.is_array else _INT
            if param.is_array:
                ok = arg.kind == NodeKind.VAR and scope.lookup(arg.name) == param.size
                if not ok:
                    raise SemanticError(f"type mismatch: expected {want}", arg.line)
            elif arg_type != _INT:
                raise SemanticError(f"type mismatch: expected {want}, found {arg_type}", arg.line)
        return _INT
    if kind == NodeKind.UNOP:
        if expr.op == "-":
            _expect_type(expr.operand, _INT, scope, functions)
            return _INT
        _expect_type(expr.operand, _BOOL, scope, functions)
        return _BOOL
    if kind == NodeKind.BINOP:
        if expr.op in _ARITH_OPS:
            _expect_type(expr.lhs, _INT, scope, functions)
            _expect_type(expr.rhs, _INT, scope, functions)
            return _INT
        if expr.op in _CMP_OPS:
            _expect_type(expr.lhs, _INT, scope, functions)
            _expect_type(expr.rhs, _INT, scope, functions)
            return _BOOL
        if expr.op in _LOGIC_OPS:
            _expect_type(expr.lhs, _BOOL, scope, functions)
            _expect_type(expr.rhs, _BOOL, scope, functions)
            return _BOOL
    raise SemanticError(f"unexpected expression kind {kind}", expr.line)
