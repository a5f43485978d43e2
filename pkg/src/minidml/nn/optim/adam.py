"""Adam with bias-corrected first and second moment estimates."""

import numpy as np

from ...errors import OptimizerStateError
from .._util import arr, mat, same_shape


def init(X):
    """Returns zero moments ``(m, v)``."""
    z = np.zeros_like(arr(X))
    return mat(z), mat(z)


def update(X, dX, lr, beta1, beta2, epsilon, t, m, v):
    """One step at 1-based timestep ``t``. Returns ``(X, m, v)``."""
    t = int(t)
    if t < 1:
        raise OptimizerStateError(f"adam timestep must be >= 1, got {t}")
    X, dX, m, v = arr(X), arr(dX), arr(m), arr(v)
    same_shape("adam update", X, dX)
    same_shape("adam first moment", X, m)
    same_shape("adam second moment", X, v)
    b1, b2 = float(beta1), float(beta2)
    m = b1 * m + (1.0 - b1) * dX
    v = b2 * v + (1.0 - b2) * dX * dX
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    return mat(X - float(lr) * m_hat / (np.sqrt(v_hat) + float(epsilon))), mat(m), mat(v)
