"""Tree-walking interpreter.

Values are :class:`~minidml.matrix.Matrix`, Python numbers (scalars) or
strings. Every matrix assigned to a variable passes through
``decide_format``. Errors raised while executing a statement are re-raised as
:class:`DSLRuntimeError` tagged with the line of the innermost statement.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .. import matrix as mx
from ..config import DEFAULT_SEED
from ..errors import DSLRuntimeError, MiniDMLError
from ..matrix import Matrix
from . import nodes as N
from .builtins import Builtin, LibraryNamespace, as_int, core_builtins, format_scalar, kind_name
from .parser import parse
from .resolver import ResolvedProgram, resolve_imports

MAX_CALL_DEPTH = 64

_MATRIX_OPS = {
    "+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow", "%%": "mod", "%/%": "intdiv",
    "<": "lt", "<=": "le", ">": "gt", ">=": "ge", "==": "eq", "!=": "ne",
    "&": "and", "&&": "and", "|": "or", "||": "or",
}

_SCALAR_OPS = {
    "+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power,
    "%%": np.mod, "%/%": np.floor_divide,
    "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
    "==": np.equal, "!=": np.not_equal,
}


class Interpreter:
    """Executes one resolved program. Not thread-safe: use one per thread.

    ``seed`` drives ``rand`` and the library ``init`` functions. ``output``
    receives the text of ``print`` calls. ``on_assign(name, value, line)``
    is called after every variable assignment, which lets callers trace
    intermediate values without changing the script.
    """

    def __init__(self, program: ResolvedProgram | N.Program | str, seed: int | None = None,
                 output: Callable[[str], None] | None = None,
                 on_assign: Callable[[str, object, int], None] | None = None):
        if isinstance(program, str):
            program = parse(program)
        if isinstance(program, N.Program):
            program = resolve_imports(program)
        self.resolved = program
        self.seed = DEFAULT_SEED if seed is None else int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.printed: list[str] = []
        self._output = output
        self.on_assign = on_assign
        self.builtins = core_builtins(self._print)
        self.depth = 0
        self.line = 0

    def _print(self, text: str):
        self.printed.append(text)
        if self._output is not None:
            self._output(text)

    # -- entry points -------------------------------------------------------------

    def run(self, inputs: Mapping[str, object] | None = None) -> dict[str, object]:
        """Execute the top-level statements; returns the final global variables."""
        env = {k: _external(k, v) for k, v in (inputs or {}).items()}
        self.exec_block(self.resolved.program.statements, env, self.resolved)
        return env

    def call_function(self, name: str, *args, **kwargs):
        """Call a function defined in the program; returns its result value(s)."""
        fn = self.resolved.functions.get(name)
        if fn is None:
            raise DSLRuntimeError(f"no function named {name!r} in the program")
        args = [_external(f"argument {i + 1}", v) for i, v in enumerate(args)]
        kwargs = {k: _external(k, v) for k, v in kwargs.items()}
        return self.invoke(fn, args, kwargs, self.resolved)

    # -- statements ---------------------------------------------------------------

    def exec_block(self, body, env: dict, module: ResolvedProgram):
        for stmt in body:
            self.exec_stmt(stmt, env, module)

    def exec_stmt(self, s, env: dict, module: ResolvedProgram):
        outer = self.line
        self.line = s.line
        try:
            if isinstance(s, N.Assign):
                value = self.eval(s.value, env, module)
                if isinstance(value, tuple):
                    raise DSLRuntimeError(f"function returns {len(value)} values; use [..] = to unpack them")
                if value is None:
                    raise DSLRuntimeError("expression has no value")
                self.assign(env, s.target, value)
            elif isinstance(s, N.MultiAssign):
                value = self.eval(s.value, env, module)
                values = value if isinstance(value, tuple) else (value,)
                if value is None:
                    values = ()
                if len(values) != len(s.targets):
                    raise DSLRuntimeError(
                        f"{_callee(s.value)} returns {len(values)} value(s) but {len(s.targets)} targets were given")
                for name, v in zip(s.targets, values):
                    self.assign(env, name, v)
            elif isinstance(s, N.ExprStmt):
                self.eval(s.expr, env, module)
            elif isinstance(s, N.For):
                self.exec_for(s, env, module)
            elif isinstance(s, N.If):
                if _truth(self.eval(s.cond, env, module)):
                    self.exec_block(s.then, env, module)
                elif s.orelse is not None:
                    self.exec_block(s.orelse, env, module)
            elif isinstance(s, (N.FunctionDef, N.Import)):
                pass  # handled when the program is resolved
            else:
                raise DSLRuntimeError(f"cannot execute {type(s).__name__}")
        except DSLRuntimeError as e:
            if e.line is None:
                raise DSLRuntimeError(e.message, s.line) from e
            raise
        except (MiniDMLError, ArithmeticError, ValueError, IndexError, TypeError) as e:
            raise DSLRuntimeError(f"{type(e).__name__}: {e}", s.line) from e
        finally:
            self.line = outer

    def exec_for(self, s: N.For, env, module):
        lo = self.eval(s.lo, env, module)
        hi = self.eval(s.hi, env, module)
        lo = as_int(_scalar(lo, "loop start"), "loop start")
        hi = _scalar(hi, "loop end")
        if not math.isfinite(hi):
            raise DSLRuntimeError(f"loop end must be finite, got {hi}")
        i = lo
        while i <= hi:
            self.assign(env, s.var, i)
            self.exec_block(s.body, env, module)
            i += 1

    def assign(self, env, name, value):
        if isinstance(value, Matrix):
            value = mx.decide_format(value)
        env[name] = value
        if self.on_assign is not None:
            self.on_assign(name, value, self.line)

    # -- expressions --------------------------------------------------------------

    def eval(self, e, env: dict, module: ResolvedProgram):
        if isinstance(e, N.Num):
            return e.value
        if isinstance(e, N.Str):
            return e.value
        if isinstance(e, N.Bool):
            return e.value
        if isinstance(e, N.Ident):
            try:
                return env[e.name]
            except KeyError:
                raise DSLRuntimeError(f"undefined identifier {e.name!r}") from None
        if isinstance(e, N.Binary):
            return self.binary(e.op, self.eval(e.left, env, module), self.eval(e.right, env, module))
        if isinstance(e, N.Unary):
            return self.unary(e.op, self.eval(e.operand, env, module))
        if isinstance(e, N.Call):
            return self.call(e, env, module)
        if isinstance(e, N.Index):
            return self.index(e, env, module)
        raise DSLRuntimeError(f"cannot evaluate {type(e).__name__}")

    def binary(self, op, a, b):
        if op == "+" and (isinstance(a, str) or isinstance(b, str)):
            return _text(a) + _text(b)
        if isinstance(a, str) or isinstance(b, str):
            raise DSLRuntimeError(f"operator {op} is not defined for strings")
        if op == "%*%":
            return mx.matmul(_to_matrix(a), _to_matrix(b))
        if isinstance(a, Matrix) or isinstance(b, Matrix):
            a = float(a) if isinstance(a, bool) else a
            b = float(b) if isinstance(b, bool) else b
            return mx.elementwise(a, b, _MATRIX_OPS[op])
        if op in ("&", "&&"):
            return bool(a) and bool(b)
        if op in ("|", "||"):
            return bool(a) or bool(b)
        with np.errstate(all="ignore"):
            r = _SCALAR_OPS[op](np.float64(a), np.float64(b))
        return bool(r) if isinstance(r, np.bool_) else float(r)

    def unary(self, op, v):
        if isinstance(v, str):
            raise DSLRuntimeError(f"operator {op} is not defined for strings")
        if op == "+":
            return v
        if isinstance(v, Matrix):
            return mx.unary(v, "neg" if op == "-" else "not")
        if op == "-":
            return -float(v)
        return not bool(v)

    def index(self, e: N.Index, env, module):
        target = self.eval(e.target, env, module)
        if not isinstance(target, Matrix):
            raise DSLRuntimeError(f"cannot index a {kind_name(target)}")
        rlo, rhi = self.slot(e.rows, env, module)
        clo, chi = self.slot(e.cols, env, module)
        return mx.slice_matrix(target, rlo, rhi, clo, chi)

    def slot(self, s, env, module):
        if s is None:
            return None, None
        if isinstance(s, N.Range):
            lo = as_int(_scalar(self.eval(s.lo, env, module), "index"), "index")
            hi = as_int(_scalar(self.eval(s.hi, env, module), "index"), "index")
            return lo, hi
        i = as_int(_scalar(self.eval(s, env, module), "index"), "index")
        return i, i

    def call(self, c: N.Call, env, module: ResolvedProgram):
        args, kwargs = [], {}
        for a in c.args:
            v = self.eval(a.value, env, module)
            if a.name is None:
                if kwargs:
                    raise DSLRuntimeError(f"positional argument after named argument in call to {_callee(c)}")
                args.append(v)
            else:
                if a.name in kwargs:
                    raise DSLRuntimeError(f"argument {a.name!r} given twice in call to {_callee(c)}")
                kwargs[a.name] = v
        if c.namespace is not None:
            ns = module.namespaces.get(c.namespace)
            if ns is None:
                raise DSLRuntimeError(f"unknown namespace {c.namespace!r}")
            if isinstance(ns, LibraryNamespace):
                fn = ns.functions.get(c.name)
                if fn is None:
                    raise DSLRuntimeError(f"{c.namespace}::{c.name} is not defined")
                return self.call_builtin(fn, args, kwargs)
            fn = ns.functions.get(c.name)
            if fn is None:
                raise DSLRuntimeError(f"{c.namespace}::{c.name} is not defined")
            return self.invoke(fn, args, kwargs, ns)
        fn = module.functions.get(c.name)
        if fn is not None:
            return self.invoke(fn, args, kwargs, module)
        b = self.builtins.get(c.name)
        if b is None:
            raise DSLRuntimeError(f"unknown function {c.name!r}")
        return self.call_builtin(b, args, kwargs)

    def call_builtin(self, b: Builtin, args, kwargs):
        out = b.call(args, kwargs, self.rng)
        if isinstance(out, list):
            out = tuple(out)
        return out

    def invoke(self, fn: N.FunctionDef, args: list, kwargs: dict, module: ResolvedProgram):
        names = [p.name for p in fn.params]
        if len(args) > len(names):
            raise DSLRuntimeError(f"{fn.name}() takes {len(names)} arguments, got {len(args)}")
        frame = dict(zip(names, args))
        for k, v in kwargs.items():
            if k not in names:
                raise DSLRuntimeError(f"{fn.name}() has no parameter named {k!r}")
            if k in frame:
                raise DSLRuntimeError(f"{fn.name}() got multiple values for {k!r}")
            frame[k] = v
        missing = [n for n in names if n not in frame]
        if missing:
            raise DSLRuntimeError(f"{fn.name}() missing argument(s): {', '.join(missing)}")
        if self.depth >= MAX_CALL_DEPTH:
            raise DSLRuntimeError(f"call depth exceeds {MAX_CALL_DEPTH} in {fn.name}()")
        self.depth += 1
        try:
            self.exec_block(fn.body, frame, module)
        finally:
            self.depth -= 1
        results = []
        for r in fn.returns:
            if r.name not in frame:
                raise DSLRuntimeError(f"{fn.name}() did not assign its return value {r.name!r}", fn.line)
            results.append(frame[r.name])
        if not results:
            return None
        return results[0] if len(results) == 1 else tuple(results)


# -- helpers ------------------------------------------------------------------------


def _external(name, v):
    if isinstance(v, (Matrix, str, bool)):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return float(v)
    if isinstance(v, np.ndarray):
        return mx.decide_format(Matrix.dense(v))
    raise TypeError(f"input {name!r}: unsupported value of type {type(v).__name__}")


def _callee(c: N.Call) -> str:
    return f"{c.namespace}::{c.name}" if c.namespace else c.name


def _text(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, Matrix):
        if v.shape == (1, 1):
            return format_scalar(v.item())
        return f"<{v.rows}x{v.cols} matrix>"
    return format_scalar(v)


def _scalar(v, what):
    if isinstance(v, Matrix):
        if v.shape != (1, 1):
            raise DSLRuntimeError(f"{what} must be a scalar, got a {v.rows}x{v.cols} matrix")
        return v.item()
    if isinstance(v, str):
        raise DSLRuntimeError(f"{what} must be a number, got a string")
    return float(v)


def _truth(v) -> bool:
    x = _scalar(v, "condition")
    if math.isnan(x):
        raise DSLRuntimeError("condition is NaN")
    return x != 0.0


def _to_matrix(v) -> Matrix:
    if isinstance(v, Matrix):
        return v
    if isinstance(v, (bool, int, float)):
        return Matrix.scalar(float(v))
    raise DSLRuntimeError(f"expected a matrix, got {kind_name(v)}")


def interpret(program, inputs: Mapping[str, object] | None = None, seed: int | None = None,
              output: Callable[[str], None] | None = None, path=None,
              module_registry=None) -> dict[str, object]:
    """Parse (if needed), resolve and run ``program``; returns the global variables."""
    if isinstance(program, str):
        program = parse(program)
    if isinstance(program, N.Program):
        program = resolve_imports(program, module_registry, path)
    return Interpreter(program, seed, output).run(inputs)
