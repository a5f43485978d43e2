"""Adagrad: per-coordinate step sizes from the running sum of squared gradients."""

import numpy as np

from .._util import arr, mat, same_shape


def init(X):
    return mat(np.zeros_like(arr(X)))


def update(X, dX, lr, epsilon, cache):
    """Returns ``(X, cache)``."""
    X, dX, cache = arr(X), arr(dX), arr(cache)
    same_shape("adagrad update", X, dX)
    same_shape("adagrad cache", X, cache)
    cache = cache + dX * dX
    return mat(X - float(lr) * dX / (np.sqrt(cache) + float(epsilon))), mat(cache)
