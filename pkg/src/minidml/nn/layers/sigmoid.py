"""Logistic sigmoid."""

import numpy as np

from .._util import arr, mat, same_shape


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def forward(X):
    return mat(_sigmoid(arr(X)))


def backward(dout, X):
    dout, X = arr(dout), arr(X)
    same_shape("sigmoid backward", dout, X)
    s = _sigmoid(X)
    return mat(dout * s * (1.0 - s))
