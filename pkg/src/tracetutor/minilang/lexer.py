"""Tokenizer for MiniLang source text."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError

KEYWORDS = {"int", "if", "else", "while", "for", "print", "return"}

TWO_CHAR_OPS = {"==", "!=", "<=", ">=", "&&", "||"}
ONE_CHAR = set("+-*/%<>=!(){}[];,")


@dataclass
class Token:
    type: str   # "kw" | "ident" | "number" | "op" | "eof"
    value: str
    line: int
    col: int

    def __repr__(self) -> str:  # compact in parser error paths
        return f"{self.type}:{self.value}@{self.line}:{self.col}"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("number", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, start_col))
            col += j - i
            i = j
            continue
        two = source[i:i + 2]
        if two in TWO_CHAR_OPS:
            tokens.append(Token("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in ONE_CHAR:
            tokens.append(Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col, expected=set())
    tokens.append(Token("eof", "", line, col))
    return tokens
