"""Rectified linear unit. The gradient at exactly 0 is 0."""

import numpy as np

from .._util import arr, mat, same_shape


def forward(X):
    return mat(np.maximum(arr(X), 0.0))


def backward(dout, X):
    dout, X = arr(dout), arr(X)
    same_shape("relu backward", dout, X)
    return mat(np.where(X > 0, dout, 0.0))
