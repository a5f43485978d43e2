"""Sequential model descriptions to training and prediction scripts.

A model is described in JSON, mirroring the fields of a Keras ``Sequential``
model::

    {
      "input_shape": [4],                      # (D,) or (C, H, W)
      "layers": [{"kind": "dense", "units": 2, "activation": "softmax"}],
      "loss": "cross_entropy",
      "optimizer": {"kind": "sgd", "lr": 0.01},
      "training": {"train_algo": "minibatch", "test_algo": "minibatch",
                   "batch_size": 32, "epochs": 10, "seed": 20180101},
      "weights_manifest": "weights/weights.json"   # optional
    }

:func:`validate_model` chains the layer shapes, :func:`generate_training_script`
and :func:`generate_prediction_script` emit scripts for the interpreter, and
:func:`load_weights` binds a weights manifest to the model's parameters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import conv as ops
from .config import DEFAULT_SEED
from .errors import ModelValidationError, ShapeError, WeightsError
from .io import read_manifest, read_matrix
from .matrix import Matrix, TensorShape
from .dsl import nodes as N
from .dsl.builtins import LIBRARY_PATHS
from .dsl.printer import _num as fmt_num
from .nn import network as net
from .nn.optim import ACCUMULATORS, KINDS, hyperparameters

LAYER_KINDS = ("dense", "conv2d", "maxpool", "relu", "sigmoid", "tanh", "dropout", "softmax")
ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax")
PARAMETRIC = ("dense", "conv2d")
TRAIN_ALGOS = ("minibatch", "batch")
TEST_ALGOS = ("minibatch", "batch", "allreduce")

# statements that generated training scripts add to the reference script shape for bookkeeping
BOOKKEEPING_TARGETS = frozenset({"N", "iters_per_epoch"})


# -- model description --------------------------------------------------------------


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int | None = None
    filters: int | None = None
    kernel: tuple[int, int] | None = None
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)
    keep_p: float | None = None


@dataclass(frozen=True)
class TrainingConfig:
    train_algo: str = "minibatch"
    test_algo: str = "minibatch"
    batch_size: int = 32
    epochs: int = 1
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.train_algo not in TRAIN_ALGOS:
            hint = " (allreduce is only valid as test_algo)" if self.train_algo == "allreduce" else ""
            raise ModelValidationError(f"train_algo must be one of {', '.join(TRAIN_ALGOS)}{hint}")
        if self.test_algo not in TEST_ALGOS:
            raise ModelValidationError(f"test_algo must be one of {', '.join(TEST_ALGOS)}")
        if int(self.batch_size) < 1:
            raise ModelValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if int(self.epochs) < 0:
            raise ModelValidationError(f"epochs must be >= 0, got {self.epochs}")

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "TrainingConfig":
        d = dict(d or {})
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ModelValidationError(f"unknown training option(s): {', '.join(sorted(unknown))}")
        for k in ("batch_size", "epochs", "seed"):
            if k in d:
                d[k] = int(d[k])
        return cls(**d)

    def with_overrides(self, **kw) -> "TrainingConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    loss: str | None = "cross_entropy"
    optimizer: Mapping = field(default_factory=lambda: {"kind": "sgd", "lr": 0.01})
    training: TrainingConfig = field(default_factory=TrainingConfig)
    weights_manifest: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping, base_dir=None) -> "ModelSpec":
        if not isinstance(d, Mapping):
            raise ModelValidationError("model description must be a JSON object")
        unknown = set(d) - {"input_shape", "layers", "loss", "optimizer", "training", "weights_manifest"}
        if unknown:
            raise ModelValidationError(f"unknown model field(s): {', '.join(sorted(unknown))}")
        if "input_shape" not in d:
            raise ModelValidationError("model has no input_shape")
        shape = tuple(int(v) for v in d["input_shape"])
        if len(shape) == 1:
            shape = (shape[0], 1, 1)
        if len(shape) != 3 or min(shape) < 1:
            raise ModelValidationError(f"input_shape must be (D,) or (C, H, W) with positive entries, got {shape}")
        layers = []
        for i, ld in enumerate(d.get("layers", []), start=1):
            layers.extend(_layer_from_dict(ld, i))
        optimizer = dict(d.get("optimizer") or {"kind": "sgd"})
        manifest = d.get("weights_manifest")
        if manifest is not None and base_dir is not None and not Path(manifest).is_absolute():
            manifest = str(Path(base_dir) / manifest)
        return cls(shape, tuple(layers), d.get("loss", "cross_entropy"), optimizer,
                   TrainingConfig.from_dict(d.get("training")), manifest)

    @classmethod
    def load(cls, path) -> "ModelSpec":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ModelValidationError(f"{path}: invalid JSON: {e}") from None
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        layers = []
        for l in self.layers:
            d = {k: v for k, v in asdict(l).items() if v is not None}
            if l.kind not in ("conv2d", "maxpool"):
                d.pop("stride"), d.pop("pad")
            layers.append({k: list(v) if isinstance(v, tuple) else v for k, v in d.items()})
        out = {"input_shape": list(self.input_shape), "layers": layers, "loss": self.loss,
               "optimizer": dict(self.optimizer), "training": asdict(self.training)}
        if self.weights_manifest is not None:
            out["weights_manifest"] = self.weights_manifest
        return out


def _pair(v, what, index):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ModelValidationError(f"{what} must be an int or a pair", index)
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _layer_from_dict(d: Mapping, index: int) -> list[LayerSpec]:
    kind = d.get("kind")
    if kind not in LAYER_KINDS:
        raise ModelValidationError(f"unknown layer kind {kind!r}", index)
    allowed = {"kind", "activation", "units", "filters", "kernel", "window", "stride", "pad", "keep_p"}
    unknown = set(d) - allowed
    if unknown:
        raise ModelValidationError(f"unknown field(s) {', '.join(sorted(unknown))}", index)
    kw = {}
    if kind == "dense":
        if "units" not in d:
            raise ModelValidationError("dense layer needs units", index)
        kw["units"] = int(d["units"])
    if kind == "conv2d":
        if "filters" not in d or "kernel" not in d:
            raise ModelValidationError("conv2d layer needs filters and kernel", index)
        kw["filters"] = int(d["filters"])
        kw["kernel"] = _pair(d["kernel"], "kernel", index)
    if kind == "maxpool":
        window = d.get("window", d.get("kernel"))
        if window is None:
            raise ModelValidationError("maxpool layer needs a window", index)
        kw["kernel"] = _pair(window, "window", index)
        kw["stride"] = _pair(d.get("stride", window), "stride", index)
    if kind in ("conv2d", "maxpool"):
        kw.setdefault("stride", _pair(d.get("stride", 1), "stride", index))
        kw["pad"] = _pair(d.get("pad", 0), "pad", index)
    if kind == "dropout":
        kw["keep_p"] = float(d.get("keep_p", 0.5))
    out = [LayerSpec(kind, **kw)]
    act = d.get("activation")
    if act not in (None, "linear"):
        if kind not in PARAMETRIC or act not in ACTIVATIONS:
            raise ModelValidationError(f"unsupported activation {act!r}", index)
        out.append(LayerSpec(act))
    return out


# -- shape validation -----------------------------------------------------------------


@dataclass(frozen=True)
class LayerShape:
    index: int  # 1-based position in the expanded layer list
    kind: str
    shape_in: tuple[int, int, int]
    shape_out: tuple[int, int, int]
    params: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    spec: LayerSpec | None = None

    @property
    def width_in(self) -> int:
        c, h, w = self.shape_in
        return c * h * w

    @property
    def width_out(self) -> int:
        c, h, w = self.shape_out
        return c * h * w


@dataclass(frozen=True)
class ShapeReport:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerShape, ...]

    @property
    def features(self) -> int:
        c, h, w = self.input_shape
        return c * h * w

    @property
    def outputs(self) -> int:
        return self.layers[-1].width_out if self.layers else self.features

    @property
    def param_shapes(self) -> dict[str, tuple[int, int]]:
        out = {}
        for l in self.layers:
            out.update(l.params)
        return out

    def chain(self, n: int) -> list[TensorShape]:
        """Activation shapes for a batch of ``n`` rows, input first."""
        shapes = [TensorShape(n, *self.input_shape)]
        shapes += [TensorShape(n, *l.shape_out) for l in self.layers]
        return shapes


def param_names(spec_layers) -> list[tuple[str, str] | None]:
    """``(W, b)`` names per layer; ``W, b`` for a single parametric layer, else ``W1, b1, ...``."""
    count = sum(1 for l in spec_layers if l.kind in PARAMETRIC)
    names, k = [], 0
    for l in spec_layers:
        if l.kind in PARAMETRIC:
            k += 1
            names.append(("W", "b") if count == 1 else (f"W{k}", f"b{k}"))
        else:
            names.append(None)
    return names


def shape_chain(spec: ModelSpec) -> ShapeReport:
    """Resolve every layer's input and output shape; no loss checks."""
    shape = tuple(spec.input_shape)
    names = param_names(spec.layers)
    out = []
    for i, (l, pn) in enumerate(zip(spec.layers, names), start=1):
        c, h, w = shape
        params = {}
        try:
            if l.kind == "dense":
                if l.units < 1:
                    raise ModelValidationError("units must be >= 1", i)
                new = (l.units, 1, 1)
                params = {pn[0]: (c * h * w, l.units), pn[1]: (1, l.units)}
            elif l.kind == "conv2d":
                if l.filters < 1:
                    raise ModelValidationError("filters must be >= 1", i)
                p = ops.ConvParams(TensorShape(1, c, h, w), l.filters, l.kernel, l.stride, l.pad)
                new = (l.filters, p.P, p.Q)
                params = {pn[0]: (l.filters, c * l.kernel[0] * l.kernel[1]), pn[1]: (1, l.filters)}
            elif l.kind == "maxpool":
                p = ops.PoolParams(TensorShape(1, c, h, w), l.kernel, l.stride, l.pad)
                new = (c, p.P, p.Q)
            elif l.kind == "dropout":
                if not 0.0 < l.keep_p <= 1.0:
                    raise ModelValidationError(f"keep_p must lie in (0, 1], got {l.keep_p}", i)
                new = shape
            else:
                new = shape
        except ShapeError as e:
            raise ModelValidationError(f"{l.kind}: {e} (input shape {c}x{h}x{w})", i) from None
        out.append(LayerShape(i, l.kind, shape, new, params, l))
        shape = new
    return ShapeReport(tuple(spec.input_shape), tuple(out))


def validate_model(spec: ModelSpec) -> ShapeReport:
    """Shape-check the model and its loss; errors name the first offending layer."""
    if spec.loss != "cross_entropy":
        raise ModelValidationError("model needs exactly one loss, 'cross_entropy'"
                                   if spec.loss is None else f"unsupported loss {spec.loss!r}")
    kind = dict(spec.optimizer).get("kind")
    if kind not in KINDS:
        raise ModelValidationError(f"unknown optimizer {kind!r}; expected one of {', '.join(KINDS)}")
    try:
        hyperparameters(kind, {k: v for k, v in spec.optimizer.items() if k != "kind"})
    except ValueError as e:
        raise ModelValidationError(str(e)) from None
    if not spec.layers:
        raise ModelValidationError("model has no layers")
    report = shape_chain(spec)
    for l in report.layers[:-1]:
        if l.kind == "softmax":
            raise ModelValidationError("softmax is only supported as the final layer", l.index)
    if report.layers[-1].kind != "softmax":
        raise ModelValidationError("cross_entropy loss needs a final softmax layer", len(report.layers))
    if not report.param_shapes:
        raise ModelValidationError("model has no trainable layer")
    return report


# -- script generation ------------------------------------------------------------------


class _Script:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def emit(self, text=""):
        self.lines.append(("  " * self.depth + text) if text else "")

    def open(self, text):
        self.emit(text + " {")
        self.depth += 1

    def close(self):
        self.depth -= 1
        self.emit("}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


_MODULE_OF = {"dense": "affine", "conv2d": "conv2d", "maxpool": "max_pool2d", "relu": "relu",
              "sigmoid": "sigmoid", "tanh": "tanh", "dropout": "dropout", "softmax": "softmax"}


def _geom_args(l: LayerShape) -> str:
    c, h, w = l.shape_in
    r, s = l.spec.kernel
    sh, sw = l.spec.stride
    ph, pw = l.spec.pad
    return ", ".join(str(v) for v in (c, h, w, r, s, sh, sw, ph, pw))


def _activation_names(report: ShapeReport) -> list[str]:
    """Variable holding each layer's output; the final softmax reads ``scores``, writes ``probs``."""
    n = len(report.layers)
    names = []
    for i, l in enumerate(report.layers, start=1):
        if i == n:
            names.append("probs")
        elif i == n - 1:
            names.append("scores")
        else:
            names.append(f"out{i}")
    return names


def _imports(report: ShapeReport, training: bool, optimizer: str | None) -> list[str]:
    mods = []
    for l in report.layers:
        m = _MODULE_OF[l.kind]
        if m == "dropout" and not training:
            continue
        if m not in mods:
            mods.append(m)
    if training:
        mods.append("cross_entropy_loss")
    # the layer imports read like the library's own scripts: alphabetical, optimizer last
    lines = [f'source("{LIBRARY_PATHS[m]}") as {m}' for m in sorted(mods)]
    if optimizer is not None:
        lines.append(f'source("{LIBRARY_PATHS[optimizer]}") as {optimizer}')
    return lines


def _forward(sc: _Script, report: ShapeReport, names, training: bool, seed: int):
    acts = _activation_names(report)
    prev = "X_batch"
    for l, pn, out in zip(report.layers, names, acts):
        k = l.index
        if l.kind == "dense":
            sc.emit(f"{out} = affine::forward({prev}, {pn[0]}, {pn[1]})")
        elif l.kind == "conv2d":
            sc.emit(f"[{out}, Hout{k}, Wout{k}] = conv2d::forward({prev}, {pn[0]}, {pn[1]}, {_geom_args(l)})")
        elif l.kind == "maxpool":
            sc.emit(f"[{out}, Hout{k}, Wout{k}] = max_pool2d::forward({prev}, {_geom_args(l)})")
        elif l.kind == "dropout":
            if training:
                sc.emit(f"[{out}, mask{k}] = dropout::forward({prev}, {fmt_num(l.spec.keep_p)}, "
                        f"{seed} + 1000 * i + {k})")
            else:
                sc.emit(f"{out} = {prev}")
        else:
            sc.emit(f"{out} = {_MODULE_OF[l.kind]}::forward({prev})")
        prev = out
    return acts


def _backward(sc: _Script, report: ShapeReport, names, acts):
    inputs = ["X_batch"] + acts[:-1]
    for l, pn, inp, out in reversed(list(zip(report.layers, names, inputs, acts))):
        k = l.index
        d_out, d_in = "d" + out, "d" + inp
        if l.kind == "dense":
            sc.emit(f"[{d_in}, d{pn[0]}, d{pn[1]}] = affine::backward({d_out}, {inp}, {pn[0]}, {pn[1]})")
        elif l.kind == "conv2d":
            sc.emit(f"[{d_in}, d{pn[0]}, d{pn[1]}] = conv2d::backward({d_out}, Hout{k}, Wout{k}, {inp}, "
                    f"{pn[0]}, {pn[1]}, {_geom_args(l)})")
        elif l.kind == "maxpool":
            sc.emit(f"{d_in} = max_pool2d::backward({d_out}, Hout{k}, Wout{k}, {inp}, {_geom_args(l)})")
        elif l.kind == "dropout":
            sc.emit(f"{d_in} = dropout::backward({d_out}, mask{k}, {fmt_num(l.spec.keep_p)})")
        elif l.kind == "softmax":
            sc.emit(f"{d_in} = softmax::backward({d_out}, {inp})")
        else:
            sc.emit(f"{d_in} = {_MODULE_OF[l.kind]}::backward({d_out}, {inp})")


def _flat_params(names) -> list[str]:
    return [n for pn in names if pn for n in pn]


def _accumulator_vars(kind: str, p: str) -> list[str]:
    return [f"{a}{p}" for a in ACCUMULATORS[kind]]


def _optimizer_init(sc: _Script, kind: str, params):
    for p in params:
        acc = _accumulator_vars(kind, p)
        if not acc:
            continue
        lhs = acc[0] if len(acc) == 1 else f"[{', '.join(acc)}]"
        sc.emit(f"{lhs} = {kind}::init({p})")


def _optimizer_update(sc: _Script, kind: str, params, hyper):
    for p in params:
        acc = _accumulator_vars(kind, p)
        if kind == "sgd":
            sc.emit(f"{p} = sgd::update({p}, d{p}, lr)")
            continue
        args = [p, f"d{p}"] + list(hyper)
        if kind == "adam":
            args.append("i")
        args += acc
        sc.emit(f"[{', '.join([p] + acc)}] = {kind}::update({', '.join(args)})")


def _init_params(sc: _Script, report: ShapeReport, names):
    n_param = sum(1 for pn in names if pn)
    seen = 0
    for l, pn in zip(report.layers, names):
        if not pn:
            continue
        seen += 1
        if l.kind == "dense":
            d_in = "D" if seen == 1 else str(l.width_in)
            d_out = "K" if seen == n_param and l.width_out == report.outputs else str(l.spec.units)
            sc.emit(f"[{pn[0]}, {pn[1]}] = affine::init({d_in}, {d_out})")
        else:
            r, s = l.spec.kernel
            sc.emit(f"[{pn[0]}, {pn[1]}] = conv2d::init({l.spec.filters}, {l.shape_in[0]}, {r}, {s})")


def _typed(names, kind="matrix[double]") -> str:
    return ", ".join(f"{kind} {n}" for n in names)


def generate_training_script(spec: ModelSpec, cfg: TrainingConfig | None = None) -> str:
    """Training script with ``train``, ``gradients`` and a driver statement.

    ``train(X, Y, epochs)`` returns the trained parameters; ``epochs = 0``
    returns the seeded initial parameters. ``gradients(X_batch, y_batch,
    params..., i)`` returns the parameter gradients and the batch loss for
    iteration ``i``; the data-parallel executor calls it per row block.
    """
    cfg = cfg or spec.training
    report = validate_model(spec)
    names = param_names(spec.layers)
    params = _flat_params(names)
    kind = spec.optimizer["kind"]
    hyper = hyperparameters(kind, {k: v for k, v in spec.optimizer.items() if k != "kind"})

    sc = _Script()
    for line in _imports(report, True, kind):
        sc.emit(line)
    sc.open(f"train = function(matrix[double] X, matrix[double] Y, double epochs) return ({_typed(params)})")
    sc.emit("N = nrow(X)")
    sc.emit("D = ncol(X)  # num features")
    sc.emit("K = ncol(Y)  # num classes")
    for h, v in hyper.items():
        sc.emit(f"{h} = {fmt_num(v)}")
    if cfg.train_algo == "minibatch":
        sc.emit(f"batch_size = {cfg.batch_size}")
        sc.emit("iters_per_epoch = ceil(N / batch_size)")
        sc.emit("num_iter = epochs * iters_per_epoch")
    else:
        sc.emit("num_iter = epochs")
    _init_params(sc, report, names)
    _optimizer_init(sc, kind, params)
    sc.open("for (i in 1:num_iter)")
    sc.emit("# Get batch")
    if cfg.train_algo == "minibatch":
        sc.emit("beg = ((i - 1) %% iters_per_epoch) * batch_size + 1")
        sc.emit("end = min(beg + batch_size - 1, N)")
        sc.emit("X_batch = X[beg:end, ]")
        sc.emit("y_batch = Y[beg:end, ]")
    else:
        sc.emit("X_batch = X")
        sc.emit("y_batch = Y")
    sc.emit("# Perform forward pass")
    acts = _forward(sc, report, names, True, cfg.seed)
    sc.emit("# Perform backward pass")
    sc.emit("dprobs = cross_entropy_loss::backward(probs, y_batch)")
    _backward(sc, report, names, acts)
    sc.emit("# Perform update")
    _optimizer_update(sc, kind, params, hyper)
    sc.close()
    sc.close()
    sc.emit()
    grads = [f"d{p}" for p in params]
    sc.open(f"gradients = function(matrix[double] X_batch, matrix[double] y_batch, {_typed(params)}, double i) "
            f"return ({_typed(grads)}, double loss)")
    acts = _forward(sc, report, names, True, cfg.seed)
    sc.emit("loss = cross_entropy_loss::forward(probs, y_batch)")
    sc.emit("dprobs = cross_entropy_loss::backward(probs, y_batch)")
    _backward(sc, report, names, acts)
    sc.close()
    sc.emit()
    sc.emit(f"epochs = {cfg.epochs}")
    sc.emit(f"[{', '.join(params)}] = train(X, Y, epochs)")
    return sc.text()


@dataclass(frozen=True)
class PlanHint:
    """How the prediction script should be executed."""

    test_algo: str
    strategy: str  # "sequential" or "parfor"
    function: str = "predict"
    partition: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def generate_prediction_script(spec: ModelSpec, cfg: TrainingConfig | None = None) -> tuple[str, PlanHint]:
    """Forward-only script defining ``predict(X, params...)`` plus a driver statement."""
    cfg = cfg or spec.training
    report = validate_model(spec)
    names = param_names(spec.layers)
    params = _flat_params(names)
    call_params = ", ".join(params)

    sc = _Script()
    for line in _imports(report, False, None):
        sc.emit(line)
    sc.open(f"forward = function(matrix[double] X_batch, {_typed(params)}) return (matrix[double] probs)")
    _forward(sc, report, names, False, cfg.seed)
    sc.close()
    sc.emit()
    sc.open(f"predict = function(matrix[double] X, {_typed(params)}) return (matrix[double] probs)")
    if cfg.test_algo == "minibatch":
        sc.emit("N = nrow(X)")
        sc.emit(f"batch_size = {cfg.batch_size}")
        sc.emit("num_batches = ceil(N / batch_size)")
        sc.emit(f"probs = forward(X[1:min(batch_size, N), ], {call_params})")
        sc.open("for (i in 2:num_batches)")
        sc.emit("beg = (i - 1) * batch_size + 1")
        sc.emit("end = min(beg + batch_size - 1, N)")
        sc.emit(f"probs = rbind(probs, forward(X[beg:end, ], {call_params}))")
        sc.close()
    else:
        if cfg.test_algo == "allreduce":
            sc.emit("# scored once per row partition; partition outputs are concatenated in row order")
        sc.emit(f"probs = forward(X, {call_params})")
    sc.close()
    sc.emit()
    sc.emit(f"probs = predict(X, {call_params})")
    if cfg.test_algo == "allreduce":
        hint = PlanHint("allreduce", "parfor", "predict", "rows")
    else:
        hint = PlanHint(cfg.test_algo, "sequential", "predict", None)
    return sc.text(), hint


# -- weights -------------------------------------------------------------------------------


def check_weights(spec: ModelSpec, weights: Mapping[str, Matrix]) -> dict[str, Matrix]:
    report = validate_model(spec)
    bound = {}
    for l in report.layers:
        for name, shape in l.params.items():
            if name not in weights:
                raise WeightsError(f"layer {l.index} ({l.kind}): missing parameter {name!r}", name)
            m = weights[name]
            if not isinstance(m, Matrix):
                m = Matrix.dense(np.asarray(m, dtype=np.float64))
            if m.shape != shape:
                raise WeightsError(f"layer {l.index} ({l.kind}): parameter {name!r} is {m.rows}x{m.cols}, "
                                   f"expected {shape[0]}x{shape[1]}", name)
            bound[name] = m
    extra = sorted(set(weights) - set(bound))
    if extra:
        raise WeightsError(f"unknown parameter(s) in weights: {', '.join(extra)}", extra[0])
    return bound


def load_weights(spec: ModelSpec, manifest_path=None) -> dict[str, Matrix]:
    """Read a weights manifest and bind it to the model's parameters."""
    path = manifest_path or spec.weights_manifest
    if path is None:
        raise WeightsError("no weights manifest given")
    files = read_manifest(path)
    report = validate_model(spec)
    for name in report.param_shapes:
        if name not in files:
            layer = next(l for l in report.layers if name in l.params)
            raise WeightsError(f"layer {layer.index} ({layer.kind}): missing parameter {name!r}", name)
    return check_weights(spec, {name: read_matrix(p) for name, p in files.items()})


def build_network(spec: ModelSpec, weights: Mapping[str, Matrix] | None = None, seed: int | None = None):
    """Python-side :class:`~minidml.nn.Sequential` equivalent of the model."""
    report = validate_model(spec)
    rng = np.random.default_rng(spec.training.seed if seed is None else seed)
    layers = []
    for l in report.layers:
        c, h, w = l.shape_in
        s = l.spec
        if l.kind == "dense":
            layers.append(net.Affine(c * h * w, s.units, rng=rng))
        elif l.kind == "conv2d":
            layers.append(net.Conv2D(c, h, w, s.filters, s.kernel, s.stride, s.pad, rng=rng))
        elif l.kind == "maxpool":
            layers.append(net.MaxPool2D(c, h, w, s.kernel, s.stride, s.pad))
        elif l.kind == "dropout":
            layers.append(net.Dropout(s.keep_p, seed=spec.training.seed + l.index))
        else:
            layers.append({"relu": net.ReLU, "sigmoid": net.Sigmoid, "tanh": net.Tanh,
                           "softmax": net.Softmax}[l.kind]())
    model = net.Sequential(layers, param_names(spec.layers))
    if weights is not None:
        model.set_params(check_weights(spec, weights))
    return model


# -- structural comparison with a hand-written script ----------------------------------------


def _calls(e) -> list:
    """Library (namespaced) calls inside an expression, outermost first."""
    out = []
    if isinstance(e, N.Call):
        if e.namespace is not None:
            out.append((e.namespace, e.name, tuple(a.value for a in e.args)))
        for a in e.args:
            out.extend(_calls(a.value))
    elif isinstance(e, N.Binary):
        out.extend(_calls(e.left) + _calls(e.right))
    elif isinstance(e, N.Unary):
        out.extend(_calls(e.operand))
    elif isinstance(e, N.Index):
        out.extend(_calls(e.target))
    return out


def statement_skeleton(body, ignore=BOOKKEEPING_TARGETS) -> list:
    """Assignment targets, library calls and loop nesting of a statement list.

    Plain-value assignments keep only their target (their right-hand sides
    are where generated and hand-written scripts are allowed to differ);
    library calls keep their arguments.
    """
    out = []
    for s in body:
        if isinstance(s, N.Assign):
            if s.target not in ignore:
                out.append(("assign", (s.target,), tuple(_calls(s.value))))
        elif isinstance(s, N.MultiAssign):
            out.append(("assign", s.targets, tuple(_calls(s.value))))
        elif isinstance(s, N.For):
            out.append(("for", s.var, tuple(statement_skeleton(s.body, ignore))))
        elif isinstance(s, N.If):
            out.append(("if", tuple(statement_skeleton(s.then, ignore)),
                        tuple(statement_skeleton(s.orelse or (), ignore))))
        elif isinstance(s, N.ExprStmt):
            out.append(("expr", tuple(_calls(s.expr))))
    return out


def statement_equivalent(generated: N.Program, reference: N.Program, function: str = "train") -> bool:
    """True iff both programs import the same libraries and ``function`` has the same skeleton."""
    gi = sorted((i.path, i.alias) for i in generated.imports)
    ri = sorted((i.path, i.alias) for i in reference.imports)
    if gi != ri:
        return False
    g, r = generated.functions.get(function), reference.functions.get(function)
    if g is None or r is None:
        return False
    if [p.name for p in r.params] != [p.name for p in g.params][:len(r.params)]:
        return False
    return statement_skeleton(g.body) == statement_skeleton(r.body)
