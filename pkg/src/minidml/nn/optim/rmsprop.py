"""RMSprop: Adagrad with an exponentially decaying squared-gradient cache."""

import numpy as np

from .._util import arr, mat, same_shape


def init(X):
    return mat(np.zeros_like(arr(X)))


def update(X, dX, lr, decay_rate, epsilon, cache):
    """Returns ``(X, cache)``."""
    X, dX, cache = arr(X), arr(dX), arr(cache)
    same_shape("rmsprop update", X, dX)
    same_shape("rmsprop cache", X, cache)
    rho = float(decay_rate)
    cache = rho * cache + (1.0 - rho) * dX * dX
    return mat(X - float(lr) * dX / (np.sqrt(cache) + float(epsilon))), mat(cache)
