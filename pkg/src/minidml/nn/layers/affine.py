"""Fully-connected layer: ``out = X @ W + b``."""

import numpy as np

from ...errors import ShapeError
from ...matrix import dense_matmul
from .._util import arr, glorot_uniform, mat, rng_of


def init(D: int, M: int, rng=None, seed=None):
    """Weights ``D x M`` drawn Glorot-uniform, zero bias ``1 x M``."""
    D, M = int(D), int(M)
    W = glorot_uniform(rng_of(rng, seed), D, M, (D, M))
    return mat(W), mat(np.zeros((1, M)))


def _check(X, W, b):
    if X.shape[1] != W.shape[0]:
        raise ShapeError(f"affine: input is {X.shape[0]}x{X.shape[1]} but W is {W.shape[0]}x{W.shape[1]}")
    if b.shape != (1, W.shape[1]):
        raise ShapeError(f"affine: bias must be 1x{W.shape[1]}, got {b.shape[0]}x{b.shape[1]}")


def forward(X, W, b):
    X, W, b = arr(X), arr(W), arr(b)
    _check(X, W, b)
    return mat(dense_matmul(X, W) + b)


def backward(dout, X, W, b):
    """Returns ``(dX, dW, db)``."""
    dout, X, W, b = arr(dout), arr(X), arr(W), arr(b)
    _check(X, W, b)
    if dout.shape != (X.shape[0], W.shape[1]):
        raise ShapeError(f"affine: upstream gradient is {dout.shape[0]}x{dout.shape[1]}, "
                         f"expected {X.shape[0]}x{W.shape[1]}")
    dX = dense_matmul(dout, W.T)
    dW = dense_matmul(X.T, dout)
    db = dout.sum(axis=0, keepdims=True)
    return mat(dX), mat(dW), mat(db)
