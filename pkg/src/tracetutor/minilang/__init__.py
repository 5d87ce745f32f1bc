"""MiniLang front end: lexer, parser, tracing interpreter, trace queries."""
from .ast import FunctionDef, Node, NodeKind, Param, Program, render_expr
from .errors import MiniLangError, ParseError, SemanticError
from .interp import (
    DEFAULT_STEP_BUDGET,
    FAULT_DIV_ZERO,
    FAULT_OOB,
    TERM_BUDGET,
    TERM_FAULT,
    TERM_NORMAL,
    TraceEvent,
    TraceLog,
    execute,
)
from .parser import parse
from .queries import NOT_APPLICABLE, InvalidQuery, TraceQuery, query_trace

__all__ = [
    "FunctionDef", "Node", "NodeKind", "Param", "Program", "render_expr",
    "MiniLangError", "ParseError", "SemanticError",
    "DEFAULT_STEP_BUDGET", "FAULT_DIV_ZERO", "FAULT_OOB",
    "TERM_BUDGET", "TERM_FAULT", "TERM_NORMAL",
    "TraceEvent", "TraceLog", "execute",
    "parse",
    "NOT_APPLICABLE", "InvalidQuery", "TraceQuery", "query_trace",
]
