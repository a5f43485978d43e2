"""Convolution layer on linearized ``N x (C*Hin*Win)`` inputs.

Thin wrapper that threads shapes into :mod:`minidml.conv` and adds a per-filter
bias.
"""

import numpy as np

from ... import conv as ops
from ...errors import ShapeError
from ...matrix import Matrix, TensorShape, decide_format
from .._util import arr, glorot_uniform, mat, rng_of


def init(F: int, C: int, Hf: int, Wf: int, rng=None, seed=None):
    """Filters ``F x (C*Hf*Wf)`` drawn Glorot-uniform, zero bias ``1 x F``."""
    F, C, Hf, Wf = int(F), int(C), int(Hf), int(Wf)
    W = glorot_uniform(rng_of(rng, seed), C * Hf * Wf, F * Hf * Wf, (F, C * Hf * Wf))
    return mat(W), mat(np.zeros((1, F)))


def params(N, C, Hin, Win, F, Hf, Wf, stride_h, stride_w, pad_h, pad_w) -> ops.ConvParams:
    return ops.ConvParams(TensorShape(int(N), int(C), int(Hin), int(Win)), int(F),
                          (int(Hf), int(Wf)), (int(stride_h), int(stride_w)), (int(pad_h), int(pad_w)))


def _as_matrix(x):
    return x if isinstance(x, Matrix) else Matrix.dense(x)


def _check_bias(b, F):
    if b.shape != (1, F):
        raise ShapeError(f"conv2d: bias must be 1x{F}, got {b.shape[0]}x{b.shape[1]}")


def forward(X, W, b, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    """Returns ``(out, Hout, Wout)``."""
    X, W = _as_matrix(X), _as_matrix(W)
    b = arr(b)
    p = params(X.rows, C, Hin, Win, W.rows, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    _check_bias(b, p.filters)
    out = ops.conv2d_forward(X, W, p).to_numpy()
    out = out + np.repeat(b, p.P * p.Q, axis=1)
    return mat(out), p.P, p.Q


def backward(dout, Hout, Wout, X, W, b, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    """Returns ``(dX, dW, db)``."""
    X, W = _as_matrix(X), _as_matrix(W)
    dout = decide_format(_as_matrix(dout))
    p = params(X.rows, C, Hin, Win, W.rows, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    if (p.P, p.Q) != (int(Hout), int(Wout)):
        raise ShapeError(f"conv2d: output extent {int(Hout)}x{int(Wout)} does not match {p.P}x{p.Q}")
    _check_bias(arr(b), p.filters)
    dX = ops.conv2d_backward_data(W, dout, p)
    dW = ops.conv2d_backward_filter(X, dout, p)
    d = dout.to_numpy().reshape(X.rows, p.filters, p.P * p.Q)
    db = d.sum(axis=(0, 2)).reshape(1, p.filters)
    return dX, dW, mat(db)
