"""Tokenizer for the R-like script language.

Tokenizing never fails: malformed input yields ``ERROR`` tokens carrying a
message, which the parser turns into a :class:`DSLSyntaxError`. Pass
``strict=True`` to raise on the first one instead.

Newlines separate statements, except inside ``(...)`` and ``[...]`` where
they are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import DSLSyntaxError

IDENT = "IDENT"
NUMBER = "NUMBER"
STRING = "STRING"
OP = "OP"
NEWLINE = "NEWLINE"
ERROR = "ERROR"
EOF = "EOF"

# longest first
_OPERATORS = (
    "%*%", "%/%", "%%", "::", "==", "!=", "<=", ">=", "&&", "||",
    "+", "-", "*", "/", "^", "<", ">", "=", "!", "&", "|",
    "(", ")", "[", "]", "{", "}", ",", ";", ":",
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.col})"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_rest(ch: str) -> bool:
    return ch.isalnum() or ch in "_."


def tokenize(text, strict: bool = False) -> list[Token]:
    """Split ``text`` (str or UTF-8 bytes) into tokens, ending with ``EOF``."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    tokens: list[Token] = []
    i, n = 0, len(text)
    line, line_start = 1, 0
    depth = 0

    def emit(kind, value, start):
        tok = Token(kind, value, line, start - line_start + 1)
        if kind == ERROR and strict:
            raise DSLSyntaxError(str(value), tok.line, tok.col)
        tokens.append(tok)

    while i < n:
        ch = text[i]
        if ch == "\n":
            if depth == 0 and tokens and tokens[-1].kind != NEWLINE:
                emit(NEWLINE, "\n", i)
            i += 1
            line, line_start = line + 1, i
            continue
        if ch in " \t\r\f\v":
            i += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = i
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == ".":
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            emit(NUMBER, float(text[start:i]), start)
            continue
        if _is_ident_start(ch):
            while i < n and _is_ident_rest(text[i]):
                i += 1
            emit(IDENT, text[start:i], start)
            continue
        if ch in "\"'":
            quote = ch
            i += 1
            buf = []
            closed = False
            while i < n and text[i] != "\n":
                c = text[i]
                if c == "\\" and i + 1 < n and text[i + 1] != "\n":
                    buf.append(_ESCAPES.get(text[i + 1], text[i + 1]))
                    i += 2
                    continue
                if c == quote:
                    closed = True
                    i += 1
                    break
                buf.append(c)
                i += 1
            if closed:
                emit(STRING, "".join(buf), start)
            else:
                emit(ERROR, "unterminated string", start)
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                if op in "([":
                    depth += 1
                elif op in ")]" and depth > 0:
                    depth -= 1
                emit(OP, op, start)
                i += len(op)
                break
        else:
            emit(ERROR, f"illegal character {ch!r}", start)
            i += 1
    tokens.append(Token(EOF, None, line, i - line_start + 1))
    return tokens
