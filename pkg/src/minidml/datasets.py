"""Seeded synthetic datasets for demos, tests and the CLI."""

from __future__ import annotations

import numpy as np


def separable(n: int, d: int, k: int = 2, seed: int = 0, spread: float = 3.0, noise: float = 0.5,
              margin: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` points in ``d`` dimensions, linearly separable into ``k`` classes.

    Class ``c`` is centred at ``spread * u_c`` for orthonormal ``u_c`` (for two
    classes the centres are ``+/- spread * u``). A point is kept only if its
    projection onto its own centre direction beats every other class by at
    least ``margin``, which makes the classes separable by construction.
    Returns ``(X, Y)`` with one-hot ``Y``.
    """
    if k < 2:
        raise ValueError("need at least two classes")
    if k > 2 and k > d:
        raise ValueError(f"{k} classes need at least {k} dimensions")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    dirs = q[:, :1].T * np.array([[1.0], [-1.0]]) if k == 2 else q[:, :k].T
    X = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        lab = rng.integers(0, k, size=n)
        pts = spread * dirs[lab] + rng.normal(scale=noise, size=(n, d))
        proj = pts @ dirs.T
        own = proj[np.arange(n), lab]
        proj[np.arange(n), lab] = -np.inf
        keep = own - proj.max(axis=1) >= margin
        take = min(int(keep.sum()), n - filled)
        X[filled:filled + take] = pts[keep][:take]
        labels[filled:filled + take] = lab[keep][:take]
        filled += take
    return X, np.eye(k)[labels]
