"""Inverted dropout: kept units are scaled by ``1 / p`` at training time."""

import numpy as np

from ...errors import ShapeError
from .._util import arr, mat, same_shape


def forward(X, p, seed):
    """Returns ``(out, mask)``; the mask is a deterministic function of seed and shape."""
    X = arr(X)
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ShapeError(f"dropout keep probability must lie in (0, 1], got {p}")
    if p == 1.0:
        mask = np.ones_like(X)
    else:
        mask = (np.random.default_rng(int(seed)).random(X.shape) < p).astype(np.float64)
    return mat(X * mask / p), mat(mask)


def backward(dout, mask, p):
    dout, mask = arr(dout), arr(mask)
    same_shape("dropout backward", dout, mask)
    return mat(dout * mask / float(p))
