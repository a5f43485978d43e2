"""Vanilla stochastic gradient descent."""

from .._util import arr, mat, same_shape


def update(X, dX, lr):
    X, dX = arr(X), arr(dX)
    same_shape("sgd update", X, dX)
    return mat(X - float(lr) * dX)
