"""Row-wise softmax."""

import numpy as np

from .._util import arr, mat, same_shape


def _probs(scores):
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward(scores):
    return mat(_probs(arr(scores)))


def backward(dprobs, scores):
    """Jacobian-vector product: ``p * (dprobs - rowsum(dprobs * p))``."""
    dprobs, scores = arr(dprobs), arr(scores)
    same_shape("softmax backward", dprobs, scores)
    p = _probs(scores)
    return mat(p * (dprobs - (dprobs * p).sum(axis=1, keepdims=True)))
