"""Builtin functions and library namespaces available to scripts.

Each builtin declares the runtime kind of its positional parameters
(``matrix``, ``scalar``, ``string`` or ``any``). Arguments are coerced at the
call boundary only: a scalar passed where a matrix is expected becomes a 1x1
matrix, and a 1x1 matrix passed where a scalar is expected is unwrapped.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import conv as ops
from .. import matrix as mx
from ..errors import DSLRuntimeError, ShapeError
from ..matrix import Matrix, TensorShape
from ..nn import layers as L
from ..nn import optim as O

M, S, STR, ANY = "matrix", "scalar", "string", "any"


@dataclass
class Builtin:
    name: str
    fn: Callable
    kinds: tuple  # per positional parameter; variadic functions reuse the last kind
    needs_rng: bool = False

    def __post_init__(self):
        sig = inspect.signature(self.fn)
        self.param_names = [p.name for p in sig.parameters.values()
                            if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD) and p.name != "rng"]
        self.required = sum(1 for p in sig.parameters.values()
                            if p.default is p.empty and p.kind == p.POSITIONAL_OR_KEYWORD and p.name != "rng")
        self.variadic = any(p.kind == p.VAR_POSITIONAL for p in sig.parameters.values())

    def kind_of(self, i: int) -> str:
        if i < len(self.kinds):
            return self.kinds[i]
        return self.kinds[-1] if self.variadic and self.kinds else ANY

    def call(self, args: list, kwargs: dict, rng=None):
        if not self.variadic and len(args) > len(self.param_names):
            raise DSLRuntimeError(f"{self.name}() takes at most {len(self.param_names)} arguments, got {len(args)}")
        for key in kwargs:
            if key not in self.param_names:
                raise DSLRuntimeError(f"{self.name}() has no parameter named {key!r}")
        args = [coerce(a, self.kind_of(i), self.name, i + 1) for i, a in enumerate(args)]
        kwargs = {k: coerce(v, self.kind_of(self.param_names.index(k)), self.name, k) for k, v in kwargs.items()}
        missing = [n for n in self.param_names[len(args):self.required] if n not in kwargs]
        if missing:
            raise DSLRuntimeError(f"{self.name}() missing argument(s): {', '.join(missing)}")
        if self.needs_rng:
            kwargs["rng"] = rng
        return self.fn(*args, **kwargs)


def coerce(value, kind: str, fname: str, pos):
    if kind == ANY:
        return value
    if kind == M:
        if isinstance(value, Matrix):
            return value
        if isinstance(value, (bool, int, float)):
            return Matrix.scalar(float(value))
        raise DSLRuntimeError(f"{fname}() argument {pos} must be a matrix, got {kind_name(value)}")
    if kind == S:
        if isinstance(value, Matrix):
            if value.shape == (1, 1):
                return value.item()
            raise DSLRuntimeError(
                f"{fname}() argument {pos} must be a scalar, got a {value.rows}x{value.cols} matrix")
        if isinstance(value, (bool, int, float)):
            return value
        raise DSLRuntimeError(f"{fname}() argument {pos} must be a scalar, got {kind_name(value)}")
    if kind == STR:
        if isinstance(value, str):
            return value
        raise DSLRuntimeError(f"{fname}() argument {pos} must be a string, got {kind_name(value)}")
    raise AssertionError(kind)


def kind_name(v) -> str:
    if isinstance(v, Matrix):
        return "matrix"
    if isinstance(v, str):
        return "string"
    if isinstance(v, (bool, int, float)):
        return "scalar"
    return type(v).__name__


def format_scalar(v) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float) and math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return str(v)


def as_int(v, what="value") -> int:
    f = float(v)
    if not math.isfinite(f) or f != int(f):
        raise DSLRuntimeError(f"{what} must be an integer, got {v!r}")
    return int(f)


# -- core builtins -------------------------------------------------------------------


def _reduce_all(kind):
    def fn(X):
        return mx.reduce(X, kind, "all").item()
    return fn


def _reduce_axis(kind, axis):
    def fn(X):
        return mx.reduce(X, kind, axis)
    return fn


def _minmax(kind):
    def fn(a, b=None):
        if b is None:
            if isinstance(a, Matrix):
                return mx.reduce(a, kind, "all").item()
            return a
        if not isinstance(a, Matrix) and not isinstance(b, Matrix):
            return min(a, b) if kind == "min" else max(a, b)
        return mx.elementwise(a, b, kind)
    return fn


def _unary(op, scalar_fn):
    def fn(x):
        if isinstance(x, Matrix):
            return mx.unary(x, op)
        return scalar_fn(x)
    return fn


def _ceil(x):
    return int(math.ceil(x))


def _floor(x):
    return int(math.floor(x))


def _matrix(data, rows=None, cols=None):
    if isinstance(data, Matrix):
        if rows is None or cols is None:
            raise DSLRuntimeError("matrix() reshape needs rows and cols")
        return mx.reshape(data, as_int(rows, "rows"), as_int(cols, "cols"))
    if rows is None or cols is None:
        raise DSLRuntimeError("matrix() needs rows and cols")
    return Matrix.full(float(data), as_int(rows, "rows"), as_int(cols, "cols"))


def _rand(rows, cols, min=0.0, max=1.0, sparsity=1.0, seed=-1, rng=None):
    r, c = as_int(rows, "rows"), as_int(cols, "cols")
    gen = np.random.default_rng(int(seed)) if seed >= 0 else rng
    vals = gen.uniform(float(min), float(max), size=(r, c))
    if sparsity < 1.0:
        vals = np.where(gen.random((r, c)) < float(sparsity), vals, 0.0)
    return Matrix.dense(vals)


def _row_index_max(X):
    # 1-based column of the first maximum in every row
    return Matrix.dense((np.argmax(X.to_numpy(), axis=1) + 1).reshape(-1, 1).astype(np.float64))


def _as_scalar(X):
    if isinstance(X, Matrix):
        return X.item()
    return X


def _as_matrix(x):
    return x if isinstance(x, Matrix) else Matrix.scalar(float(x))


def _length(X):
    return X.rows * X.cols


def _conv_params(X_rows, C, Hin, Win, K, Hf, Wf, sh, sw, ph, pw):
    return ops.ConvParams(TensorShape(X_rows, as_int(C), as_int(Hin), as_int(Win)), K,
                          (as_int(Hf), as_int(Wf)), (as_int(sh), as_int(sw)), (as_int(ph), as_int(pw)))


def _conv2d(X, W, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    p = _conv_params(X.rows, C, Hin, Win, W.rows, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    return ops.conv2d_forward(X, W, p)


def _conv2d_backward_filter(X, dout, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    probe = _conv_params(X.rows, C, Hin, Win, 1, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    pq = probe.P * probe.Q
    if dout.cols % pq:
        raise ShapeError(f"upstream gradient has {dout.cols} columns, not a multiple of P*Q = {pq}")
    p = _conv_params(X.rows, C, Hin, Win, dout.cols // pq, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    return ops.conv2d_backward_filter(X, dout, p)


def _conv2d_backward_data(W, dout, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    p = _conv_params(dout.rows, C, Hin, Win, W.rows, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    return ops.conv2d_backward_data(W, dout, p)


def _pool_params(n, C, Hin, Win, Hf, Wf, sh, sw, ph, pw):
    return ops.PoolParams(TensorShape(n, as_int(C), as_int(Hin), as_int(Win)), (as_int(Hf), as_int(Wf)),
                          (as_int(sh), as_int(sw)), (as_int(ph), as_int(pw)))


def _max_pool(X, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    return ops.maxpool_forward(X, _pool_params(X.rows, C, Hin, Win, Hf, Wf, stride_h, stride_w, pad_h, pad_w))[0]


def _max_pool_backward(X, dout, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    p = _pool_params(X.rows, C, Hin, Win, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    _, argmax = ops.maxpool_forward(X, p)
    return ops.maxpool_backward(argmax, dout, p)


def _rbind(*parts):
    return mx.concat_rows(parts)


def _cbind(*parts):
    return mx.concat_cols(parts)


def _nnz(X):
    return X.nnz


def _scalar_math(fn):
    def g(x):
        with np.errstate(all="ignore"):
            return float(fn(np.float64(x)))
    return g


def _stop(message):
    raise DSLRuntimeError(str(message))


def core_builtins(output) -> dict[str, Builtin]:
    """Registry of global builtins; ``output`` receives ``print`` lines."""

    def _print(value):
        if isinstance(value, Matrix):
            output(np.array2string(value.to_numpy(), precision=6))
        else:
            output(value if isinstance(value, str) else format_scalar(value))

    table = [
        ("nrow", lambda X: X.rows, (M,)),
        ("ncol", lambda X: X.cols, (M,)),
        ("length", _length, (M,)),
        ("nnz", _nnz, (M,)),
        ("sum", _reduce_all("sum"), (M,)),
        ("mean", _reduce_all("mean"), (M,)),
        ("min", _minmax("min"), (ANY, ANY)),
        ("max", _minmax("max"), (ANY, ANY)),
        ("rowSums", _reduce_axis("sum", "rows"), (M,)),
        ("colSums", _reduce_axis("sum", "cols"), (M,)),
        ("rowMeans", _reduce_axis("mean", "rows"), (M,)),
        ("colMeans", _reduce_axis("mean", "cols"), (M,)),
        ("rowMaxs", _reduce_axis("max", "rows"), (M,)),
        ("colMaxs", _reduce_axis("max", "cols"), (M,)),
        ("rowMins", _reduce_axis("min", "rows"), (M,)),
        ("colMins", _reduce_axis("min", "cols"), (M,)),
        ("rowIndexMax", _row_index_max, (M,)),
        ("t", mx.transpose, (M,)),
        ("solve", mx.solve, (M, M)),
        ("matmult", mx.matmul, (M, M)),
        ("exp", _unary("exp", _scalar_math(np.exp)), (ANY,)),
        ("log", _unary("log", _scalar_math(np.log)), (ANY,)),
        ("sqrt", _unary("sqrt", _scalar_math(np.sqrt)), (ANY,)),
        ("abs", _unary("abs", abs), (ANY,)),
        ("sign", _unary("sign", _scalar_math(np.sign)), (ANY,)),
        ("round", _unary("round", _scalar_math(np.round)), (ANY,)),
        ("floor", _unary("floor", _floor), (ANY,)),
        ("ceil", _unary("ceil", _ceil), (ANY,)),
        ("sigmoid", _unary("sigmoid", _scalar_math(lambda x: 1.0 / (1.0 + np.exp(-x)))), (ANY,)),
        ("matrix", _matrix, (ANY, S, S)),
        ("as.scalar", _as_scalar, (ANY,)),
        ("as.matrix", _as_matrix, (ANY,)),
        ("rbind", _rbind, (M,)),
        ("cbind", _cbind, (M,)),
        ("conv2d", _conv2d, (M, M) + (S,) * 9),
        ("conv2d_backward_filter", _conv2d_backward_filter, (M, M) + (S,) * 9),
        ("conv2d_backward_data", _conv2d_backward_data, (M, M) + (S,) * 9),
        ("max_pool", _max_pool, (M,) + (S,) * 9),
        ("max_pool_backward", _max_pool_backward, (M, M) + (S,) * 9),
        ("print", _print, (ANY,)),
        ("stop", _stop, (ANY,)),
    ]
    reg = {name: Builtin(name, fn, kinds) for name, fn, kinds in table}
    reg["rand"] = Builtin("rand", _rand, (S, S, S, S, S, S), needs_rng=True)
    return reg


# -- library namespaces ---------------------------------------------------------------


def _ns(path, entries) -> "LibraryNamespace":
    return LibraryNamespace(path, {name: Builtin(f"{path}::{name}", fn, kinds, rng)
                                   for name, (fn, kinds, rng) in entries.items()})


@dataclass
class LibraryNamespace:
    path: str
    functions: dict


def _layer(mod, **kinds):
    return {name: (getattr(mod, name), k, name == "init" and mod in (L.affine, L.conv2d))
            for name, k in kinds.items()}


LIBRARY: dict[str, LibraryNamespace] = {
    "nn/layers/affine.dml": _ns("affine", _layer(L.affine, init=(S, S), forward=(M, M, M),
                                                 backward=(M, M, M, M))),
    "nn/layers/relu.dml": _ns("relu", _layer(L.relu, forward=(M,), backward=(M, M))),
    "nn/layers/sigmoid.dml": _ns("sigmoid", _layer(L.sigmoid, forward=(M,), backward=(M, M))),
    "nn/layers/tanh.dml": _ns("tanh", _layer(L.tanh, forward=(M,), backward=(M, M))),
    "nn/layers/softmax.dml": _ns("softmax", _layer(L.softmax, forward=(M,), backward=(M, M))),
    "nn/layers/cross_entropy_loss.dml": _ns("cross_entropy_loss", _layer(
        L.cross_entropy_loss, forward=(M, M), backward=(M, M))),
    "nn/layers/dropout.dml": _ns("dropout", _layer(L.dropout, forward=(M, S, S), backward=(M, M, S))),
    "nn/layers/conv2d.dml": _ns("conv2d", _layer(
        L.conv2d, init=(S, S, S, S), forward=(M, M, M) + (S,) * 9,
        backward=(M, S, S, M, M, M) + (S,) * 9)),
    "nn/layers/max_pool2d.dml": _ns("max_pool2d", _layer(
        L.max_pool2d, forward=(M,) + (S,) * 9, backward=(M, S, S, M) + (S,) * 9)),
    "nn/optim/sgd.dml": _ns("sgd", {"update": (O.sgd.update, (M, M, S), False)}),
    "nn/optim/sgd_momentum.dml": _ns("sgd_momentum", {
        "init": (O.sgd_momentum.init, (M,), False),
        "update": (O.sgd_momentum.update, (M, M, S, S, M), False)}),
    "nn/optim/sgd_nesterov.dml": _ns("sgd_nesterov", {
        "init": (O.sgd_nesterov.init, (M,), False),
        "update": (O.sgd_nesterov.update, (M, M, S, S, M), False)}),
    "nn/optim/adagrad.dml": _ns("adagrad", {
        "init": (O.adagrad.init, (M,), False),
        "update": (O.adagrad.update, (M, M, S, S, M), False)}),
    "nn/optim/rmsprop.dml": _ns("rmsprop", {
        "init": (O.rmsprop.init, (M,), False),
        "update": (O.rmsprop.update, (M, M, S, S, S, M), False)}),
    "nn/optim/adam.dml": _ns("adam", {
        "init": (O.adam.init, (M,), False),
        "update": (O.adam.update, (M, M, S, S, S, S, S, M, M), False)}),
}

# canonical import path per layer / optimizer module name
LIBRARY_PATHS = {path.rsplit("/", 1)[1][:-4]: path for path in LIBRARY}
