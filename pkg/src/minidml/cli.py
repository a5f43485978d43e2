"""Command-line interface.

Subcommands::

    minidml run SCRIPT --input X=x.csv --output W=w.csv
    minidml translate MODEL.json --out-dir DIR
    minidml train MODEL.json X.csv Y.csv --out-dir DIR
    minidml predict MODEL.json X.csv --weights DIR/weights.json --output probs.csv
    minidml gradcheck (LAYER | MODEL.json)

Exit status: 0 success, 2 usage error, 3 validation error (bad model, script,
weights, config or input binding), 4 numeric or runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .dsl.interpreter import Interpreter, format_scalar
from .dsl.parser import parse
from .dsl.resolver import resolve_imports
from .errors import (DSLRuntimeError, DSLSyntaxError, FormatError, ImportResolutionError, MiniDMLError,
                     ModelValidationError, WeightsError)
from .gradcheck import LAYER_NAMES, check_layer, check_network, kink_margin
from .io import read_matrix, write_matrix, write_weights
from .matrix import Matrix, set_sparsity_threshold
from .nn.layers import cross_entropy_loss
from .planner import (DataParallelBatch, ParForScoring, SingleNode, estimate_memory, execute_data_parallel_batch,
                      execute_parfor_scoring, initial_weights, row_partitions, select_plan)
from .translator import (ModelSpec, build_network, generate_prediction_script, generate_training_script,
                         load_weights, validate_model)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4
GRADCHECK_LIMIT = 1e-4


class ValidationFailure(Exception):
    """Bad user input detected by the CLI itself."""


# -- argument helpers ------------------------------------------------------------------


def _bindings(pairs, what) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep or not name or not value:
            raise ValidationFailure(f"--{what} expects name=value, got {pair!r}")
        if name in out:
            raise ValidationFailure(f"--{what} {name} given twice")
        out[name] = value
    return out


def _read_binding(name: str, value: str):
    path = Path(value)
    if not path.exists():
        try:
            return float(value)
        except ValueError:
            raise ValidationFailure(f"input {name!r}: file {value} does not exist") from None
    try:
        return read_matrix(path)
    except (FormatError, OSError) as e:
        raise ValidationFailure(f"input {name!r}: {e}") from None


def _read_data(path: str, what: str) -> Matrix:
    if not Path(path).exists():
        raise ValidationFailure(f"{what}: file {path} does not exist")
    return _read_binding(what, path)


def _config(args) -> Config:
    cfg = Config()
    if getattr(args, "config", None):
        try:
            cfg = load_config(args.config)
        except (OSError, ValueError) as e:
            raise ValidationFailure(f"config {args.config}: {e}") from None
    try:
        cfg = cfg.with_overrides(memory_budget_bytes=getattr(args, "budget", None),
                                 max_workers=getattr(args, "workers", None),
                                 seed=getattr(args, "seed", None))
    except ValueError as e:
        raise ValidationFailure(str(e)) from None
    set_sparsity_threshold(cfg.sparsity_threshold)
    return cfg


def _spec(args) -> ModelSpec:
    path = Path(args.model)
    if not path.exists():
        raise ValidationFailure(f"model file {path} does not exist")
    spec = ModelSpec.load(path)
    training = spec.training.with_overrides(train_algo=getattr(args, "train_algo", None),
                                            test_algo=getattr(args, "test_algo", None),
                                            batch_size=getattr(args, "batch_size", None),
                                            epochs=getattr(args, "epochs", None),
                                            seed=getattr(args, "seed", None))
    spec = ModelSpec(spec.input_shape, spec.layers, spec.loss, spec.optimizer, training, spec.weights_manifest)
    validate_model(spec)
    return spec


def _write_output(name, value, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(value, Matrix):
        write_matrix(value, path)
    elif isinstance(value, (str, bool)):
        path.write_text((value if isinstance(value, str) else format_scalar(value)) + "\n", encoding="utf-8")
    else:
        path.write_text(repr(float(value)) + "\n", encoding="utf-8")


def _plan_text(plan) -> str:
    if isinstance(plan, DataParallelBatch):
        return f"DataParallelBatch(partitions={plan.partitions}, block_rows={plan.block_rows})"
    if isinstance(plan, ParForScoring):
        return f"ParForScoring(workers={plan.workers})"
    return "SingleNode"


# -- commands ---------------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _config(args)
    path = Path(args.script)
    if not path.exists():
        raise ValidationFailure(f"script {path} does not exist")
    program = resolve_imports(parse(path.read_text(encoding="utf-8")), path=path)
    inputs = {name: _read_binding(name, value) for name, value in _bindings(args.input, "input").items()}
    outputs = _bindings(args.output, "output")
    env = Interpreter(program, cfg.seed, output=print).run(inputs)
    for name, dest in outputs.items():
        if name not in env:
            raise DSLRuntimeError(f"script did not define output {name!r}")
        _write_output(name, env[name], dest)
    return EXIT_OK


def _translate(spec: ModelSpec, out_dir: Path) -> tuple[Path, Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path, predict_path, hint_path = out_dir / "train.dml", out_dir / "predict.dml", out_dir / "plan_hint.json"
    train_path.write_text(generate_training_script(spec), encoding="utf-8")
    text, hint = generate_prediction_script(spec)
    predict_path.write_text(text, encoding="utf-8")
    hint_path.write_text(hint.to_json(), encoding="utf-8")
    return train_path, predict_path, hint_path


def cmd_translate(args) -> int:
    _config(args)
    spec = _spec(args)
    for p in _translate(spec, Path(args.out_dir)):
        print(f"wrote {p}")
    return EXIT_OK


def _check_data(spec: ModelSpec, X: Matrix, Y: Matrix | None = None):
    report = validate_model(spec)
    if X.cols != report.features:
        raise ValidationFailure(f"X has {X.cols} columns but the model expects {report.features}")
    if Y is not None:
        if Y.rows != X.rows:
            raise ValidationFailure(f"X has {X.rows} rows but Y has {Y.rows}")
        if Y.cols != report.outputs:
            raise ValidationFailure(f"Y has {Y.cols} columns but the model outputs {report.outputs}")


def _scores(spec, weights, X, cfg) -> Matrix:
    text, _ = generate_prediction_script(spec)
    return execute_parfor_scoring(text, weights, X, ParForScoring(1), seed=cfg.seed)


def cmd_train(args) -> int:
    cfg = _config(args)
    spec = _spec(args)
    X, Y = _read_data(args.X, "X"), _read_data(args.Y, "Y")
    _check_data(spec, X, Y)
    out_dir = Path(args.out_dir)
    train_path, _, _ = _translate(spec, out_dir)
    tc = spec.training
    batch = tc.batch_size if tc.train_algo == "minibatch" else None
    plan = select_plan(estimate_memory(spec, X.shape, batch), cfg)
    print(f"plan: {_plan_text(plan)}")
    script = train_path.read_text(encoding="utf-8")
    if isinstance(plan, SingleNode):
        env = Interpreter(script, tc.seed).run({"X": X, "Y": Y})
        weights = {name: env[name] for name in validate_model(spec).param_shapes}
    else:
        w0 = initial_weights(script, X, Y, seed=tc.seed)
        weights = execute_data_parallel_batch(script, w0, X, Y, plan, spec.optimizer, tc.epochs, batch,
                                              seed=tc.seed).weights
    for name, w in weights.items():
        if not np.all(np.isfinite(w.to_numpy())):
            raise DSLRuntimeError(f"training diverged: parameter {name!r} is not finite")
    manifest = write_weights(weights, out_dir / "weights")
    probs = _scores(spec, weights, X, cfg)
    loss = cross_entropy_loss.forward(probs, Y)
    acc = float(np.mean(np.argmax(probs.to_numpy(), 1) == np.argmax(Y.to_numpy(), 1)))
    print(f"final loss: {loss:.6f}")
    print(f"training accuracy: {acc:.4f}")
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args)
    spec = _spec(args)
    X = _read_data(args.X, "X")
    _check_data(spec, X)
    weights = load_weights(spec, args.weights)
    text, hint = generate_prediction_script(spec)
    est = estimate_memory(spec, X.shape, None, training=False)
    plan = select_plan(est, cfg, test_algo=spec.training.test_algo)
    if isinstance(plan, DataParallelBatch):
        plan = ParForScoring(plan.partitions, tuple(row_partitions(X.rows, plan.partitions)))
    if isinstance(plan, ParForScoring):
        probs = execute_parfor_scoring(text, weights, X, plan, seed=cfg.seed)
    else:
        probs = Interpreter(text, cfg.seed).run({"X": X, **weights})["probs"]
    print(f"plan: {_plan_text(plan)}")
    _write_output("probs", probs, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _config(args)
    seed = cfg.seed if args.seed is None else args.seed
    if args.target in LAYER_NAMES:
        report = check_layer(args.target, seed=seed)
    elif Path(args.target).suffix == ".json" or Path(args.target).exists():
        args.model = args.target
        spec = _spec(args)
        report = _gradcheck_model(spec, seed, args.rows)
    else:
        raise ValidationFailure(f"unknown layer {args.target!r}; expected a model file or one of "
                                f"{', '.join(LAYER_NAMES)}")
    worst = max(report.values()) if report else 0.0
    for name in sorted(report):
        print(f"{name}: max relative error {report[name]:.3e}")
    ok = worst <= GRADCHECK_LIMIT and math.isfinite(worst)
    print(f"{'PASS' if ok else 'FAIL'} (limit {GRADCHECK_LIMIT:g})")
    return EXIT_OK if ok else EXIT_RUNTIME


def _gradcheck_model(spec: ModelSpec, seed: int, rows: int) -> dict[str, float]:
    report = validate_model(spec)
    rng = np.random.default_rng(seed)
    # redraw inputs until no relu / pooling decision sits within finite-difference reach of a kink
    for _ in range(100):
        X = rng.normal(size=(rows, report.features))
        Y = np.eye(report.outputs)[rng.integers(0, report.outputs, size=rows)]
        model = build_network(spec, seed=int(rng.integers(2**31)))
        model.forward(Matrix.dense(X), training=True)
        if kink_margin(model) > 1e-3:
            break
    return check_network(model, X, Y)


# -- parser -----------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, training=False):
    p.add_argument("--config", help="ini/TOML-style key = value file (memory_budget_bytes, max_workers, ...)")
    p.add_argument("--budget", type=int, help="memory budget in bytes")
    p.add_argument("--workers", type=int, help="maximum number of parallel workers")
    p.add_argument("--seed", type=int, help="random seed")
    if training:
        p.add_argument("--train-algo", choices=("minibatch", "batch"))
        p.add_argument("--test-algo", choices=("minibatch", "batch", "allreduce"))
        p.add_argument("--batch-size", type=int)
        p.add_argument("--epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minidml", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="interpret a script")
    p.add_argument("script")
    p.add_argument("--input", action="append", metavar="NAME=PATH", help="bind a CSV/COO file (or a number)")
    p.add_argument("--output", action="append", metavar="NAME=PATH", help="write a variable after the run")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("translate", help="generate training and prediction scripts from a model")
    p.add_argument("model")
    p.add_argument("--out-dir", default=".")
    _common(p, training=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("train", help="translate, plan, train and export weights")
    p.add_argument("model")
    p.add_argument("X")
    p.add_argument("Y")
    p.add_argument("--out-dir", default=".")
    _common(p, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score data with trained weights")
    p.add_argument("model")
    p.add_argument("X")
    p.add_argument("--weights", help="weights manifest (defaults to the model's weights_manifest)")
    p.add_argument("--output", default="probs.csv")
    _common(p, training=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of a layer or a model")
    p.add_argument("target", help=f"a layer ({', '.join(LAYER_NAMES)}) or a model JSON file")
    p.add_argument("--rows", type=int, default=3, help="batch rows for model checks")
    _common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


_VALIDATION = (ValidationFailure, ModelValidationError, WeightsError, DSLSyntaxError, ImportResolutionError,
               FormatError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MiniDMLError, ArithmeticError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
