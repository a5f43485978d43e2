"""Pretty printer; ``parse(pretty_print(tree)) == tree`` for every parser-producible tree."""

from __future__ import annotations

from . import nodes as N
from .parser import (BINARY_LEVELS, LEVEL_NOT, LEVEL_POSTFIX, LEVEL_POW, LEVEL_UNARY)

_INDENT = "  "
_STR_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _level(e) -> int:
    if isinstance(e, N.Binary):
        return BINARY_LEVELS[e.op]
    if isinstance(e, N.Unary):
        return LEVEL_NOT if e.op == "!" else LEVEL_UNARY
    return LEVEL_POSTFIX + 1


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _wrap(e, ok: bool) -> str:
    s = expr_str(e)
    return s if ok else f"({s})"


def expr_str(e) -> str:
    if isinstance(e, N.Num):
        return _num(e.value)
    if isinstance(e, N.Str):
        return '"' + "".join(_STR_ESCAPES.get(c, c) for c in e.value) + '"'
    if isinstance(e, N.Bool):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, N.Ident):
        return e.name
    if isinstance(e, N.Unary):
        floor = LEVEL_NOT if e.op == "!" else LEVEL_UNARY
        return e.op + _wrap(e.operand, _level(e.operand) >= floor)
    if isinstance(e, N.Binary):
        p = BINARY_LEVELS[e.op]
        if e.op == "^":
            left = _wrap(e.left, _level(e.left) > LEVEL_POW)
            right = _wrap(e.right, _level(e.right) >= LEVEL_UNARY)
            return f"{left}^{right}"
        left = _wrap(e.left, _level(e.left) >= p)
        right = _wrap(e.right, _level(e.right) > p)
        return f"{left} {e.op} {right}"
    if isinstance(e, N.Call):
        args = ", ".join((f"{a.name}={expr_str(a.value)}" if a.name else expr_str(a.value)) for a in e.args)
        prefix = f"{e.namespace}::" if e.namespace else ""
        return f"{prefix}{e.name}({args})"
    if isinstance(e, N.Index):
        return f"{_wrap(e.target, _level(e.target) > LEVEL_POSTFIX)}[{_slot(e.rows)}, {_slot(e.cols)}]"
    raise TypeError(f"not an expression: {e!r}")


def _slot(s) -> str:
    if s is None:
        return ""
    if isinstance(s, N.Range):
        return f"{expr_str(s.lo)}:{expr_str(s.hi)}"
    return expr_str(s)


def _params(ps) -> str:
    return ", ".join(f"{p.type} {p.name}" for p in ps)


def _stmt_lines(s, depth: int) -> list[str]:
    pad = _INDENT * depth
    if isinstance(s, N.Import):
        return [f'{pad}source({expr_str(N.Str(s.path))}) as {s.alias}']
    if isinstance(s, N.Assign):
        return [f"{pad}{s.target} = {expr_str(s.value)}"]
    if isinstance(s, N.MultiAssign):
        return [f"{pad}[{', '.join(s.targets)}] = {expr_str(s.value)}"]
    if isinstance(s, N.ExprStmt):
        return [f"{pad}{expr_str(s.expr)}"]
    if isinstance(s, N.For):
        return ([f"{pad}for ({s.var} in {expr_str(s.lo)}:{expr_str(s.hi)}) {{"]
                + _block(s.body, depth + 1) + [f"{pad}}}"])
    if isinstance(s, N.If):
        out = [f"{pad}if ({expr_str(s.cond)}) {{"] + _block(s.then, depth + 1)
        if s.orelse is not None:
            out += [f"{pad}}} else {{"] + _block(s.orelse, depth + 1)
        return out + [f"{pad}}}"]
    if isinstance(s, N.FunctionDef):
        head = f"{pad}{s.name} = function({_params(s.params)})"
        if s.returns:
            head += f" return ({_params(s.returns)})"
        return [head + " {"] + _block(s.body, depth + 1) + [f"{pad}}}"]
    raise TypeError(f"not a statement: {s!r}")


def _block(body, depth) -> list[str]:
    lines = []
    for s in body:
        lines.extend(_stmt_lines(s, depth))
    return lines


def pretty_print(tree) -> str:
    """Source text for a Program, a statement or an expression."""
    if isinstance(tree, N.Program):
        return "\n".join(_block(tree.body, 0)) + "\n"
    if isinstance(tree, (N.Assign, N.MultiAssign, N.ExprStmt, N.For, N.If, N.FunctionDef, N.Import)):
        return "\n".join(_stmt_lines(tree, 0)) + "\n"
    return expr_str(tree)
