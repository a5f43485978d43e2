"""Recursive-descent parser.

Operator precedence, loosest first::

    |  ||          (left)
    &  &&          (left)
    !              (prefix)
    < <= > >= == !=
    +  -
    *  /
    %*%  %%  %/%
    -  +           (prefix)
    ^              (right)
    X[...]  f(...)
"""

from __future__ import annotations

from ..errors import DSLSyntaxError
from . import nodes as N
from .lexer import EOF, ERROR, IDENT, NEWLINE, NUMBER, OP, STRING, Token, tokenize

RESERVED = frozenset({"function", "return", "for", "in", "if", "else", "TRUE", "FALSE"})

LEVEL_OR, LEVEL_AND, LEVEL_NOT, LEVEL_CMP, LEVEL_ADD, LEVEL_MUL, LEVEL_SPECIAL, LEVEL_UNARY, LEVEL_POW, \
    LEVEL_POSTFIX = range(1, 11)

BINARY_LEVELS = {
    "|": LEVEL_OR, "||": LEVEL_OR,
    "&": LEVEL_AND, "&&": LEVEL_AND,
    "<": LEVEL_CMP, "<=": LEVEL_CMP, ">": LEVEL_CMP, ">=": LEVEL_CMP, "==": LEVEL_CMP, "!=": LEVEL_CMP,
    "+": LEVEL_ADD, "-": LEVEL_ADD,
    "*": LEVEL_MUL, "/": LEVEL_MUL,
    "%*%": LEVEL_SPECIAL, "%%": LEVEL_SPECIAL, "%/%": LEVEL_SPECIAL,
    "^": LEVEL_POW,
}


def _describe(tok: Token) -> str:
    if tok.kind == EOF:
        return "end of input"
    if tok.kind == NEWLINE:
        return "end of line"
    if tok.kind == STRING:
        return f"string {tok.value!r}"
    if tok.kind == NUMBER:
        return f"number {tok.value!r}"
    return repr(tok.value)


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        for t in tokens:
            if t.kind == ERROR:
                raise DSLSyntaxError(str(t.value), t.line, t.col)

    # -- token helpers ----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != EOF:
            self.pos += 1
        return t

    def at_op(self, *ops) -> bool:
        return self.tok.kind == OP and self.tok.value in ops

    def at_word(self, word) -> bool:
        return self.tok.kind == IDENT and self.tok.value == word

    def error(self, expected: str) -> DSLSyntaxError:
        return DSLSyntaxError(f"expected {expected}, found {_describe(self.tok)}", self.tok.line, self.tok.col)

    def expect_op(self, op) -> Token:
        if not self.at_op(op):
            raise self.error(repr(op))
        return self.advance()

    def expect_closer(self, op, opener: Token) -> Token:
        if not self.at_op(op):
            raise self.error(f"{op!r} to close {opener.value!r} from line {opener.line}")
        return self.advance()

    def expect_word(self, word) -> Token:
        if not self.at_word(word):
            raise self.error(repr(word))
        return self.advance()

    def expect_name(self, what="identifier") -> str:
        if self.tok.kind != IDENT or self.tok.value in RESERVED:
            raise self.error(what)
        return self.advance().value

    def skip_newlines(self):
        while self.tok.kind == NEWLINE:
            self.advance()

    def skip_separators(self):
        while self.tok.kind == NEWLINE or self.at_op(";"):
            self.advance()

    # -- program / statements ------------------------------------------------------

    def parse_program(self) -> N.Program:
        body = []
        self.skip_separators()
        while self.tok.kind != EOF:
            body.append(self.statement(top=True))
            self.end_statement()
            self.skip_separators()
        return N.Program(tuple(body))

    def end_statement(self):
        if self.tok.kind in (NEWLINE, EOF) or self.at_op(";", "}"):
            return
        raise self.error("end of statement")

    def block(self) -> tuple:
        self.skip_newlines()
        if not self.at_op("{"):
            return (self.statement(top=False),)
        opener = self.advance()
        body = []
        self.skip_separators()
        while not self.at_op("}"):
            if self.tok.kind == EOF:
                raise self.error(f"'}}' to close '{{' from line {opener.line}")
            body.append(self.statement(top=False))
            self.end_statement()
            self.skip_separators()
        self.advance()
        return tuple(body)

    def statement(self, top: bool):
        t = self.tok
        line = t.line
        if self.at_word("source"):
            lp, path, rp = self.peek(1), self.peek(2), self.peek(3)
            if lp.kind == OP and lp.value == "(" and path.kind == STRING and rp.kind == OP and rp.value == ")":
                return self.import_stmt(top)
        if self.at_word("for"):
            return self.for_stmt()
        if self.at_word("if"):
            return self.if_stmt()
        if self.at_op("["):
            return self.multi_assign()
        if t.kind == IDENT and t.value not in RESERVED:
            nxt = self.peek(1)
            if nxt.kind == OP and nxt.value == "=":
                name = self.advance().value
                self.advance()
                if self.at_word("function"):
                    if not top:
                        raise DSLSyntaxError("functions may only be defined at top level", t.line, t.col)
                    return self.function_def(name, line)
                return N.Assign(name, self.expr(), line=line)
        return N.ExprStmt(self.expr(), line=line)

    def import_stmt(self, top):
        t = self.advance()
        if not top:
            raise DSLSyntaxError("source() is only allowed at top level", t.line, t.col)
        self.expect_op("(")
        path = self.advance().value
        self.expect_op(")")
        self.expect_word("as")
        alias = self.expect_name("import alias")
        return N.Import(path, alias, line=t.line)

    def for_stmt(self):
        line = self.advance().line
        self.expect_op("(")
        var = self.expect_name("loop variable")
        self.expect_word("in")
        lo = self.expr()
        self.expect_op(":")
        hi = self.expr()
        self.expect_op(")")
        return N.For(var, lo, hi, self.block(), line=line)

    def if_stmt(self):
        line = self.advance().line
        self.expect_op("(")
        cond = self.expr()
        self.expect_op(")")
        then = self.block()
        orelse = None
        save = self.pos
        self.skip_newlines()
        if self.at_word("else"):
            self.advance()
            orelse = self.block()
        else:
            self.pos = save
        return N.If(cond, then, orelse, line=line)

    def multi_assign(self):
        t = self.advance()
        targets = [self.expect_name("assignment target")]
        while self.at_op(","):
            self.advance()
            targets.append(self.expect_name("assignment target"))
        self.expect_op("]")
        self.expect_op("=")
        value = self.expr()
        if not isinstance(value, N.Call):
            raise DSLSyntaxError("multiple assignment needs a function call on the right", t.line, t.col)
        return N.MultiAssign(tuple(targets), value, line=t.line)

    def typed_params(self) -> tuple:
        self.expect_op("(")
        params = []
        if not self.at_op(")"):
            params.append(self.typed_param())
            while self.at_op(","):
                self.advance()
                params.append(self.typed_param())
        self.expect_op(")")
        return tuple(params)

    def typed_param(self) -> N.Param:
        type_name = self.expect_name("parameter type")
        if self.at_op("["):
            self.advance()
            inner = self.expect_name("element type")
            self.expect_op("]")
            type_name = f"{type_name}[{inner}]"
        return N.Param(type_name, self.expect_name("parameter name"))

    def function_def(self, name, line):
        self.expect_word("function")
        params = self.typed_params()
        returns = ()
        self.skip_newlines()
        if self.at_word("return"):
            self.advance()
            returns = self.typed_params()
        body = self.block()
        return N.FunctionDef(name, params, returns, body, line=line)

    # -- expressions ---------------------------------------------------------------

    def expr(self):
        return self.binary_level(LEVEL_OR)

    def binary_level(self, level):
        if level == LEVEL_NOT:
            if self.at_op("!"):
                self.advance()
                return N.Unary("!", self.binary_level(LEVEL_NOT))
            return self.binary_level(LEVEL_CMP)
        if level == LEVEL_UNARY:
            return self.unary()
        left = self.binary_level(level + 1)
        while self.tok.kind == OP and BINARY_LEVELS.get(self.tok.value) == level:
            op = self.advance().value
            self.skip_newlines()
            right = self.binary_level(level + 1)
            left = N.Binary(op, left, right)
        return left

    def unary(self):
        if self.at_op("-", "+"):
            op = self.advance().value
            return N.Unary(op, self.unary())
        return self.power()

    def power(self):
        base = self.postfix()
        if self.at_op("^"):
            self.advance()
            return N.Binary("^", base, self.unary())
        return base

    def postfix(self):
        e = self.primary()
        while self.at_op("["):
            self.advance()
            rows = self.slot(",")
            self.expect_op(",")
            cols = self.slot("]")
            self.expect_op("]")
            e = N.Index(e, rows, cols)
        return e

    def slot(self, closer):
        if self.at_op(closer):
            return None
        lo = self.expr()
        if self.at_op(":"):
            self.advance()
            return N.Range(lo, self.expr())
        return lo

    def primary(self):
        t = self.tok
        if t.kind == NUMBER:
            self.advance()
            return N.Num(t.value)
        if t.kind == STRING:
            self.advance()
            return N.Str(t.value)
        if t.kind == IDENT and t.value in ("TRUE", "FALSE"):
            self.advance()
            return N.Bool(t.value == "TRUE")
        if t.kind == IDENT and t.value not in RESERVED:
            self.advance()
            if self.at_op("::"):
                self.advance()
                name = self.expect_name("function name")
                if not self.at_op("("):
                    raise self.error("'(' after namespaced function name")
                return N.Call(name, self.call_args(), t.value)
            if self.at_op("("):
                return N.Call(t.value, self.call_args())
            return N.Ident(t.value)
        if self.at_op("("):
            opener = self.advance()
            e = self.expr()
            self.expect_closer(")", opener)
            return e
        raise self.error("expression")

    def call_args(self) -> tuple:
        opener = self.expect_op("(")
        args = []
        if not self.at_op(")"):
            args.append(self.call_arg())
            while self.at_op(","):
                self.advance()
                args.append(self.call_arg())
        self.expect_closer(")", opener)
        return tuple(args)

    def call_arg(self) -> N.Arg:
        t = self.tok
        nxt = self.peek(1)
        if t.kind == IDENT and t.value not in RESERVED and nxt.kind == OP and nxt.value == "=":
            self.advance()
            self.advance()
            return N.Arg(self.expr(), t.value)
        return N.Arg(self.expr())


def parse(source) -> N.Program:
    """Parse script text (or a token list) into a :class:`Program`."""
    tokens = source if isinstance(source, list) else tokenize(source)
    return Parser(tokens).parse_program()


def parse_file(path) -> N.Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
