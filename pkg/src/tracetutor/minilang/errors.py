"""Errors raised by the MiniLang front end."""
from __future__ import annotations


class MiniLangError(Exception):
    pass


class ParseError(MiniLangError):
    """Syntax violation; carries position and the token set that was expected."""

    def __init__(self, message: str, line: int, col: int, expected: set[str] | None = None):
        super().__init__(f"{message} at line {line}, column {col}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected or set()


class SemanticError(MiniLangError):
    """Scope or type violation in an otherwise well-formed parse."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} at line {line}")
        self.message = message
        self.line = line
