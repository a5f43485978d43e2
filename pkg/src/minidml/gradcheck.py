"""Central-difference gradient checks for layers and whole networks.

Errors are reported per checked quantity as the maximum over entries of
``|analytic - numeric| / max(|analytic|, |numeric|, floor)``. The floor keeps
entries whose true gradient is (numerically) zero from dividing round-off by
round-off.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from . import conv as ops
from .matrix import Matrix
from .nn import layers as L
from .nn.network import MaxPool2D, ReLU, Sequential

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-6

LAYER_NAMES = ("affine", "relu", "sigmoid", "tanh", "softmax", "cross_entropy_loss", "conv2d",
               "max_pool2d", "dropout")


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Numeric gradient of scalar ``f`` at ``x`` (``x`` is restored afterwards)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = DEFAULT_FLOOR) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _away_from_zero(rng, shape, margin=0.1):
    return rng.uniform(margin, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _distinct(rng, shape, gap=0.05):
    # values pairwise separated by at least ``gap`` so no pooling window ties
    n = int(np.prod(shape))
    return (rng.permutation(n).reshape(shape) - n / 2.0) * gap


def _check(f_of: Mapping[str, Callable[[np.ndarray], float]], points: Mapping[str, np.ndarray],
           analytic: Mapping[str, np.ndarray], h: float, floor: float) -> dict[str, float]:
    report = {}
    for name, x in points.items():
        numeric = central_difference(f_of[name], x, h)
        report[name] = relative_error(analytic[name], numeric, floor)
    return report


def check_layer(name: str, seed: int = 0, h: float = DEFAULT_STEP, floor: float = DEFAULT_FLOOR) -> dict[str, float]:
    """Gradient check of one library layer under a random linear read-out loss.

    Returns the max relative error per input / parameter. Layers without
    parameters report only ``"X"`` (or the layer's input names).
    """
    rng = np.random.default_rng(seed)
    if name == "affine":
        X, W, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(1, 5))
        R = rng.normal(size=(3, 5))

        def out(X, W, b):
            return float(np.sum(L.affine.forward(X, W, b).to_numpy() * R))

        dX, dW, db = L.affine.backward(R, X, W, b)
        return _check({"X": lambda v: out(v, W, b), "W": lambda v: out(X, v, b), "b": lambda v: out(X, W, v)},
                      {"X": X, "W": W, "b": b},
                      {"X": dX.to_numpy(), "W": dW.to_numpy(), "b": db.to_numpy()}, h, floor)
    if name in ("relu", "sigmoid", "tanh"):
        mod = getattr(L, name)
        X = _away_from_zero(rng, (3, 5)) * 2.0
        R = rng.normal(size=X.shape)
        dX = mod.backward(R, X).to_numpy()
        return _check({"X": lambda v: float(np.sum(mod.forward(v).to_numpy() * R))}, {"X": X}, {"X": dX}, h, floor)
    if name == "softmax":
        S, R = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        dS = L.softmax.backward(R, S).to_numpy()
        return _check({"scores": lambda v: float(np.sum(L.softmax.forward(v).to_numpy() * R))},
                      {"scores": S}, {"scores": dS}, h, floor)
    if name == "cross_entropy_loss":
        probs = rng.uniform(0.1, 1.0, size=(3, 4))
        probs /= probs.sum(axis=1, keepdims=True)
        y = np.eye(4)[rng.integers(0, 4, size=3)]
        dp = L.cross_entropy_loss.backward(probs, y).to_numpy()
        return _check({"probs": lambda v: L.cross_entropy_loss.forward(v, y)}, {"probs": probs}, {"probs": dp},
                      h, floor)
    if name == "conv2d":
        C, H, Wd, F, R_, S_ = 2, 5, 5, 3, 3, 3
        geom = (C, H, Wd, R_, S_, 2, 2, 1, 1)
        X = rng.normal(size=(2, C * H * Wd))
        W, b = rng.normal(size=(F, C * R_ * S_)), rng.normal(size=(1, F))
        out0, hout, wout = L.conv2d.forward(X, W, b, *geom)
        R = rng.normal(size=out0.shape)

        def conv_out(X, W, b):
            return float(np.sum(L.conv2d.forward(X, W, b, *geom)[0].to_numpy() * R))

        dX, dW, db = L.conv2d.backward(R, hout, wout, X, W, b, *geom)
        return _check({"X": lambda v: conv_out(v, W, b), "W": lambda v: conv_out(X, v, b),
                       "b": lambda v: conv_out(X, W, v)},
                      {"X": X, "W": W, "b": b},
                      {"X": dX.to_numpy(), "W": dW.to_numpy(), "b": db.to_numpy()}, h, floor)
    if name == "max_pool2d":
        C, H, Wd = 2, 4, 4
        geom = (C, H, Wd, 2, 2, 2, 2, 0, 0)
        X = _distinct(rng, (2, C * H * Wd))
        out0, hout, wout = L.max_pool2d.forward(X, *geom)
        R = rng.normal(size=out0.shape)
        dX = L.max_pool2d.backward(R, hout, wout, X, *geom).to_numpy()
        return _check({"X": lambda v: float(np.sum(L.max_pool2d.forward(v, *geom)[0].to_numpy() * R))},
                      {"X": X}, {"X": dX}, h, floor)
    if name == "dropout":
        X, R = rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
        p, s = 0.7, int(rng.integers(0, 2 ** 31))
        _, mask = L.dropout.forward(X, p, s)
        dX = L.dropout.backward(R, mask, p).to_numpy()
        return _check({"X": lambda v: float(np.sum(L.dropout.forward(v, p, s)[0].to_numpy() * R))},
                      {"X": X}, {"X": dX}, h, floor)
    raise ValueError(f"unknown layer {name!r}; expected one of {', '.join(LAYER_NAMES)}")


def kink_margin(net: Sequential) -> float:
    """Distance of the last forward pass from relu kinks and pooling ties."""
    margin = np.inf
    for layer in net.layers:
        if isinstance(layer, ReLU) and layer._cache is not None:
            margin = min(margin, float(np.min(np.abs(layer._cache.to_numpy()))))
        elif isinstance(layer, MaxPool2D) and layer._cache is not None:
            x = layer._cache[0]
            c, h, w, r, s, sh, sw, ph, pw = layer.geom
            p = ops.PoolParams(ops.TensorShape(x.rows, c, h, w), (r, s), (sh, sw), (ph, pw))
            _, vals, _ = ops._pool_windows(x, p)
            if vals.shape[2] > 1:
                top2 = np.sort(vals, axis=2)[:, :, -2:, :]
                gap = top2[:, :, 1, :] - top2[:, :, 0, :]
                gap = gap[np.isfinite(gap)]
                if gap.size:
                    margin = min(margin, float(np.min(gap)))
    return margin


def check_network(net: Sequential, X, y, h: float = DEFAULT_STEP, floor: float = DEFAULT_FLOOR,
                  include_input: bool = True) -> dict[str, float]:
    """Check every parameter (and optionally the input) of ``net`` under its cross-entropy loss."""
    X = np.array(X.to_numpy() if isinstance(X, Matrix) else X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    probs = net.forward(X)
    dX = net.backward_from_loss(probs, y).to_numpy()
    grads = {name: g.to_numpy() for name, g in net.grads.items()}
    params = {name: p.to_numpy() for name, p in net.params.items()}

    def loss_with(name):
        def f(v):
            trial = dict(params)
            trial[name] = v
            net.set_params({k: Matrix.dense(a) for k, a in trial.items()})
            try:
                return net.loss(net.forward(X), y)
            finally:
                net.set_params({k: Matrix.dense(a) for k, a in params.items()})
        return f

    report = {}
    for name in params:
        report[name] = relative_error(grads[name], central_difference(loss_with(name), params[name], h), floor)
    if include_input:
        report["X"] = relative_error(dX, central_difference(lambda v: net.loss(net.forward(v), y), X, h), floor)
    return report
