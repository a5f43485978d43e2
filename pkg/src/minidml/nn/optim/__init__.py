"""Optimizers.

Each submodule exposes functional ``init``/``update`` in the shape the scripts
use. :class:`OptimizerState` and :func:`optimizer_update` wrap them for
Python callers that keep one state per parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from ...errors import OptimizerStateError, ShapeError
from ...matrix import Matrix, as_matrix
from . import adagrad, adam, rmsprop, sgd, sgd_momentum, sgd_nesterov

KINDS = ("sgd", "sgd_momentum", "sgd_nesterov", "adagrad", "rmsprop", "adam")

DEFAULTS = {
    "sgd": {"lr": 0.01},
    "sgd_momentum": {"lr": 0.01, "mu": 0.9},
    "sgd_nesterov": {"lr": 0.01, "mu": 0.9},
    "adagrad": {"lr": 0.01, "epsilon": 1e-8},
    "rmsprop": {"lr": 0.01, "decay_rate": 0.99, "epsilon": 1e-8},
    "adam": {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
}

# accumulator names per optimizer, in the order the functional update takes them
ACCUMULATORS = {
    "sgd": (),
    "sgd_momentum": ("v",),
    "sgd_nesterov": ("v",),
    "adagrad": ("cache",),
    "rmsprop": ("cache",),
    "adam": ("m", "v"),
}

MODULES = {
    "sgd": sgd,
    "sgd_momentum": sgd_momentum,
    "sgd_nesterov": sgd_nesterov,
    "adagrad": adagrad,
    "rmsprop": rmsprop,
    "adam": adam,
}


def hyperparameters(kind: str, overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    if kind not in DEFAULTS:
        raise ValueError(f"unknown optimizer {kind!r}; expected one of {', '.join(KINDS)}")
    hp = dict(DEFAULTS[kind])
    for k, v in (overrides or {}).items():
        if k not in hp:
            raise ValueError(f"optimizer {kind} has no hyperparameter {k!r}")
        hp[k] = float(v)
    return hp


@dataclass(frozen=True)
class OptimizerState:
    """Optimizer kind, hyperparameters and per-parameter accumulators.

    ``t`` counts completed updates. ``accumulators`` is ``None`` until
    :func:`init_state` has run.
    """

    kind: str
    hyper: Mapping[str, float] = field(default_factory=dict)
    accumulators: Mapping[str, Matrix] | None = None
    t: int = 0


def init_state(kind: str, param, **hyper) -> OptimizerState:
    hp = hyperparameters(kind, hyper)
    param = as_matrix(param)
    acc = {}
    if kind in ("sgd_momentum", "sgd_nesterov", "adagrad", "rmsprop"):
        acc[ACCUMULATORS[kind][0]] = MODULES[kind].init(param)
    elif kind == "adam":
        acc["m"], acc["v"] = adam.init(param)
    return OptimizerState(kind, hp, acc, 0)


def optimizer_update(state: OptimizerState, param, grad) -> tuple[Matrix, OptimizerState]:
    """Apply one update; returns the new parameter and the advanced state."""
    if state.accumulators is None:
        raise OptimizerStateError(f"{state.kind} state used before init_state")
    param, grad = as_matrix(param), as_matrix(grad)
    if param.shape != grad.shape:
        raise ShapeError(f"parameter is {param.rows}x{param.cols} but gradient is {grad.rows}x{grad.cols}")
    hp = state.hyper
    acc = dict(state.accumulators)
    t = state.t + 1
    k = state.kind
    if k == "sgd":
        new = sgd.update(param, grad, hp["lr"])
    elif k in ("sgd_momentum", "sgd_nesterov"):
        new, acc["v"] = MODULES[k].update(param, grad, hp["lr"], hp["mu"], acc["v"])
    elif k == "adagrad":
        new, acc["cache"] = adagrad.update(param, grad, hp["lr"], hp["epsilon"], acc["cache"])
    elif k == "rmsprop":
        new, acc["cache"] = rmsprop.update(param, grad, hp["lr"], hp["decay_rate"], hp["epsilon"], acc["cache"])
    elif k == "adam":
        new, acc["m"], acc["v"] = adam.update(param, grad, hp["lr"], hp["beta1"], hp["beta2"],
                                              hp["epsilon"], t, acc["m"], acc["v"])
    else:
        raise ValueError(f"unknown optimizer {k!r}")
    return new, replace(state, accumulators=acc, t=t)


__all__ = ["KINDS", "DEFAULTS", "ACCUMULATORS", "MODULES", "OptimizerState", "init_state",
           "optimizer_update", "hyperparameters", "sgd", "sgd_momentum", "sgd_nesterov",
           "adagrad", "rmsprop", "adam"]
