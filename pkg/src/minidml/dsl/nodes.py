"""Syntax tree of a script.

Nodes are frozen dataclasses; source line numbers are carried but excluded
from equality so that re-parsed pretty-printed trees compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


def _line():
    return field(default=0, compare=False, repr=False)


# -- expressions -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Arg:
    value: "Expr"
    name: Optional[str] = None


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Arg, ...] = ()
    namespace: Optional[str] = None


@dataclass(frozen=True)
class Range:
    lo: "Expr"
    hi: "Expr"


Slot = Union[None, Range, "Expr"]


@dataclass(frozen=True)
class Index:
    target: "Expr"
    rows: Slot = None
    cols: Slot = None


Expr = Union[Num, Str, Bool, Ident, Unary, Binary, Call, Index]


# -- statements ----------------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    line: int = _line()


@dataclass(frozen=True)
class MultiAssign:
    targets: tuple[str, ...]
    value: Call
    line: int = _line()


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    line: int = _line()


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: tuple["Stmt", ...]
    line: int = _line()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: Optional[tuple["Stmt", ...]] = None
    line: int = _line()


@dataclass(frozen=True)
class Param:
    type: str
    name: str


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[Param, ...]
    returns: tuple[Param, ...]
    body: tuple["Stmt", ...]
    line: int = _line()


@dataclass(frozen=True)
class Import:
    path: str
    alias: str
    line: int = _line()


Stmt = Union[Assign, MultiAssign, ExprStmt, For, If, FunctionDef, Import]


@dataclass(frozen=True)
class Program:
    body: tuple[Stmt, ...]

    @property
    def imports(self) -> list[Import]:
        return [s for s in self.body if isinstance(s, Import)]

    @property
    def functions(self) -> dict[str, FunctionDef]:
        return {s.name: s for s in self.body if isinstance(s, FunctionDef)}

    @property
    def statements(self) -> list[Stmt]:
        return [s for s in self.body if not isinstance(s, (Import, FunctionDef))]
