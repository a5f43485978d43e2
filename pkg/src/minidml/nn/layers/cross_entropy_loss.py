"""Mean cross-entropy between predicted probabilities and (soft) targets."""

import numpy as np

from .._util import arr, mat, same_shape

EPS_CLIP = 1e-15


def forward(probs, y) -> float:
    probs, y = arr(probs), arr(y)
    same_shape("cross_entropy_loss", probs, y)
    return float(-np.sum(y * np.log(probs + EPS_CLIP)) / probs.shape[0])


def backward(probs, y):
    probs, y = arr(probs), arr(y)
    same_shape("cross_entropy_loss", probs, y)
    return mat(-(y / (probs + EPS_CLIP)) / probs.shape[0])
