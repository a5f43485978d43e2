"""Conversions shared by the layer and optimizer functions."""

import numpy as np

from ..config import DEFAULT_SEED
from ..errors import ShapeError
from ..matrix import Matrix, as_array


def arr(x) -> np.ndarray:
    return as_array(x)


def mat(a: np.ndarray) -> Matrix:
    return Matrix._wrap(np.array(a, dtype=np.float64))


def rng_of(rng=None, seed=None) -> np.random.Generator:
    if rng is not None:
        return rng
    return np.random.default_rng(DEFAULT_SEED if seed is None else int(seed))


def same_shape(what, a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shape {a.shape[0]}x{a.shape[1]} does not match {b.shape[0]}x{b.shape[1]}")


def glorot_uniform(rng, fan_in, fan_out, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)
