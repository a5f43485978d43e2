"""Memory estimation, execution-plan selection and the partitioned executors.

A job is run on a single node when its worst-case working set fits the
memory budget. Otherwise training is split into row partitions (made of
whole fixed-size blocks) that fit individually, and scoring requested with
``test_algo = "allreduce"`` runs parfor-style over contiguous row ranges.
Parallelism is simulated with threads in this process; each worker owns its
own interpreter and the coordinator does every reduction and update.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Union

from .config import Config
from .dsl import nodes as N
from .dsl.interpreter import Interpreter
from .dsl.parser import parse
from .dsl.resolver import ResolvedProgram, resolve_imports
from .errors import CapacityError, ModelValidationError, ShapeError
from .matrix import Matrix, as_matrix, concat_rows, slice_matrix
from .nn.optim import ACCUMULATORS, init_state, optimizer_update
from .translator import ModelSpec, ShapeReport, shape_chain

F64 = 8


# -- memory estimates ----------------------------------------------------------------


@dataclass(frozen=True)
class MemoryEstimate:
    """Worst-case dense working set: ``per_row_bytes * rows + fixed_bytes``.

    ``items`` breaks the estimate down per term as ``(name, per_row, fixed)``.
    """

    rows: int
    per_row_bytes: int
    fixed_bytes: int
    items: tuple[tuple[str, int, int], ...] = ()

    @property
    def total_bytes(self) -> int:
        return self.bytes_for(self.rows)

    @property
    def batch_bytes(self) -> int:
        """The part of the estimate that scales with the batch."""
        return self.per_row_bytes * self.rows

    def bytes_for(self, rows: int) -> int:
        return self.per_row_bytes * int(rows) + self.fixed_bytes

    def item(self, name: str) -> int:
        for n, per_row, fixed in self.items:
            if n == name:
                return per_row * self.rows + fixed
        raise KeyError(name)


def _layer_terms(report: ShapeReport, training: bool) -> list[tuple[str, int]]:
    # per-row bytes for each layer; forward keeps every activation alive for the
    # backward pass, and each value may briefly coexist with its re-formatted copy
    terms = []
    for l in report.layers:
        k = f"layer{l.index}:{l.kind}"
        out = l.width_out * F64
        terms.append((f"{k}:activation", 2 * out))
        if l.kind == "conv2d":
            c, h, w = l.shape_in
            r, s = l.spec.kernel
            _, p, q = l.shape_out
            patches = c * r * s * p * q * F64
            # patch tensor, its transposed copy, and the product before reshaping
            terms.append((f"{k}:im2col", 3 * patches + out))
        if l.kind == "maxpool":
            c, _, _ = l.shape_in
            r, s = l.spec.kernel
            _, p, q = l.shape_out
            terms.append((f"{k}:windows", c * r * s * p * q * F64 + out))  # window values + argmax
        if l.kind == "dropout" and training:
            terms.append((f"{k}:mask", 2 * l.width_out * F64))
        if training:
            terms.append((f"{k}:gradient", 2 * l.width_in * F64))
            if l.kind == "conv2d":
                c, h, w = l.shape_in
                r, s = l.spec.kernel
                _, p, q = l.shape_out
                terms.append((f"{k}:im2col_backward", 3 * c * r * s * p * q * F64))
    return terms


def estimate_memory(model: ModelSpec | ShapeReport, data_dims, batch_size: int | None = None,
                    training: bool = True, optimizer: str | None = None) -> MemoryEstimate:
    """Estimate the worst-case bytes of one step over ``min(batch_size, rows)`` rows.

    ``data_dims`` is ``(rows, cols)`` of the input (or just ``rows``). The input
    batch, the output, every activation and its gradient, im2col buffers and
    pooling windows scale with the batch; parameters, their gradients and
    optimizer accumulators are fixed.
    """
    if isinstance(model, ModelSpec):
        report = shape_chain(model)
        optimizer = optimizer or dict(model.optimizer).get("kind", "sgd")
    else:
        report = model
    optimizer = optimizer or "sgd"
    if isinstance(data_dims, (tuple, list)):
        n, cols = int(data_dims[0]), int(data_dims[1])
        if cols != report.features:
            raise ModelValidationError(f"data has {cols} columns but the model expects {report.features}")
    else:
        n = int(data_dims)
    rows = n if batch_size is None else min(int(batch_size), n)

    items = [("input", report.features * F64, 0), ("output", report.outputs * F64, 0)]
    if training and report.layers:
        items.append(("labels", report.outputs * F64, 0))
    items += [(name, b, 0) for name, b in _layer_terms(report, training)]
    # parameter, gradient, optimizer accumulators, plus one update temporary
    copies = (3 + len(ACCUMULATORS[optimizer])) if training else 1
    for name, (r, c) in report.param_shapes.items():
        items.append((f"param:{name}", 0, copies * r * c * F64))
    per_row = sum(i[1] for i in items)
    fixed = sum(i[2] for i in items)
    return MemoryEstimate(rows, per_row, fixed, tuple(items))


# -- plans ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleNode:
    kind = "SingleNode"


@dataclass(frozen=True)
class DataParallelBatch:
    partitions: int
    block_rows: int = 16
    kind = "DataParallelBatch"


@dataclass(frozen=True)
class ParForScoring:
    workers: int
    row_partitions: tuple[tuple[int, int], ...] = ()
    kind = "ParForScoring"


ExecutionPlan = Union[SingleNode, DataParallelBatch, ParForScoring]


def row_partitions(rows: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous ``[lo, hi)`` ranges; the first ``rows % parts`` get one extra row."""
    if parts < 1:
        raise ValueError("need at least one partition")
    parts = min(parts, max(rows, 1))
    base, extra = divmod(rows, parts)
    out, lo = [], 0
    for i in range(parts):
        hi = lo + base + (1 if i < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def block_ranges(rows: int, block_rows: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + block_rows, rows)) for lo in range(0, rows, block_rows)]


def partition_blocks(rows: int, block_rows: int, parts: int) -> list[list[tuple[int, int]]]:
    """Split the row blocks into ``parts`` contiguous groups of whole blocks."""
    blocks = block_ranges(rows, block_rows)
    return [blocks[lo:hi] for lo, hi in row_partitions(len(blocks), parts)]


def select_plan(estimate: MemoryEstimate, cfg: Config | None = None, test_algo: str | None = None) -> ExecutionPlan:
    """Pick an execution strategy; a pure function of the estimate and the config.

    ``test_algo = "allreduce"`` always yields parfor scoring. Otherwise the job
    runs on a single node iff the estimate fits the budget, else as
    data-parallel batches with the fewest partitions that each fit.
    """
    cfg = cfg or Config()
    if test_algo == "allreduce":
        workers = max(1, min(cfg.max_workers, estimate.rows))
        return ParForScoring(workers, tuple(row_partitions(estimate.rows, workers)))
    budget = cfg.memory_budget_bytes
    if estimate.total_bytes <= budget:
        return SingleNode()
    room = budget - estimate.fixed_bytes
    fit = room // estimate.per_row_bytes if estimate.per_row_bytes and room > 0 else 0
    if fit < 1:
        raise CapacityError(f"a single row needs {estimate.bytes_for(1)} bytes, "
                            f"more than the budget of {budget} bytes")
    block = min(cfg.block_rows, fit)
    n_blocks = math.ceil(estimate.rows / block)
    parts = max(2, math.ceil(n_blocks / (fit // block)))
    return DataParallelBatch(parts, block)


# -- executors -------------------------------------------------------------------------------


def _resolve(program) -> ResolvedProgram:
    if isinstance(program, ResolvedProgram):
        return program
    if isinstance(program, str):
        program = parse(program)
    if isinstance(program, N.Program):
        return resolve_imports(program)
    raise TypeError(f"expected a script, parsed program or resolved program, got {type(program).__name__}")


def _param_args(resolved: ResolvedProgram, function: str, weights: Mapping[str, Matrix], skip: int,
                trailing: int = 0) -> list[Matrix]:
    fn = resolved.functions.get(function)
    if fn is None:
        raise ModelValidationError(f"program defines no {function!r} function")
    names = [p.name for p in fn.params[skip:len(fn.params) - trailing]]
    missing = [n for n in names if n not in weights]
    if missing:
        raise ModelValidationError(f"no weights for parameter(s) {', '.join(missing)} of {function}()")
    return [as_matrix(weights[n]) for n in names]


def _run_partitions(tasks, workers: int):
    """Run callables on a thread pool; results in task order, first failure (by order) re-raised."""
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        errors = [f.exception() for f in futures]
    for e in errors:
        if e is not None:
            raise e
    return [f.result() for f in futures]


def execute_parfor_scoring(program, weights: Mapping[str, Matrix], X, plan: ParForScoring | int,
                           function: str = "predict", seed: int | None = None) -> Matrix:
    """Score contiguous row partitions in parallel and concatenate them in row order.

    ``function(X, params...)`` is called once per partition, each in its own
    interpreter, with the parameters looked up in ``weights`` by name.
    """
    resolved = _resolve(program)
    X = as_matrix(X)
    if isinstance(plan, int):
        plan = ParForScoring(plan)
    parts = plan.row_partitions or tuple(row_partitions(X.rows, plan.workers))
    if parts[0][0] != 0 or parts[-1][1] != X.rows or any(a[1] != b[0] for a, b in zip(parts, parts[1:])):
        raise ShapeError(f"row partitions {parts} do not cover rows 0..{X.rows}")
    args = _param_args(resolved, function, weights, skip=1)

    def task(lo, hi):
        def run():
            part = slice_matrix(X, lo + 1, hi)
            return as_matrix(Interpreter(resolved, seed).call_function(function, part, *args))
        return run

    outputs = _run_partitions([task(lo, hi) for lo, hi in parts], plan.workers)
    return concat_rows(outputs)


@dataclass
class TrainingResult:
    weights: dict[str, Matrix]
    losses: list[float] = field(default_factory=list)
    iterations: int = 0


def _batches(n: int, batch_size: int | None, iteration: int) -> tuple[int, int]:
    if batch_size is None or batch_size >= n:
        return 0, n
    per_epoch = math.ceil(n / batch_size)
    lo = ((iteration - 1) % per_epoch) * batch_size
    return lo, min(lo + batch_size, n)


def iterations_for(n: int, epochs: int, batch_size: int | None) -> int:
    if batch_size is None:
        return int(epochs)
    return int(epochs) * math.ceil(n / batch_size)


def execute_data_parallel_batch(program, weights: Mapping[str, Matrix], X, Y,
                                plan: DataParallelBatch | int, optimizer: Mapping,
                                epochs: int = 1, batch_size: int | None = None,
                                seed: int | None = None) -> TrainingResult:
    """Data-parallel training over row partitions.

    Each step's rows are cut into blocks of ``plan.block_rows``; partitions own
    contiguous runs of whole blocks. Workers evaluate the script's
    ``gradients(X_batch, y_batch, params..., i)`` per block and scale the
    result by the block's share of the step. The coordinator sums the block
    gradients left to right in global block order, so any partition count
    gives bit-identical weights, and applies one optimizer update per
    parameter. ``batch_size = None`` means full-batch steps.
    """
    resolved = _resolve(program)
    X, Y = as_matrix(X), as_matrix(Y)
    if X.rows != Y.rows:
        raise ShapeError(f"X has {X.rows} rows but Y has {Y.rows}")
    if isinstance(plan, int):
        plan = DataParallelBatch(plan)
    grad_fn = resolved.functions.get("gradients")
    if grad_fn is None:
        raise ModelValidationError("training program defines no 'gradients' function")
    names = [p.name for p in grad_fn.params[2:-1]]
    params = {n: as_matrix(w) for n, w in zip(names, _param_args(resolved, "gradients", weights, 2, 1))}
    kind = optimizer["kind"]
    hyper = {k: v for k, v in optimizer.items() if k != "kind"}
    states = {n: init_state(kind, params[n], **hyper) for n in names}
    interpreters = [Interpreter(resolved, seed) for _ in range(plan.partitions)]
    result = TrainingResult(dict(params))

    for i in range(1, iterations_for(X.rows, epochs, batch_size) + 1):
        lo, hi = _batches(X.rows, batch_size, i)
        n = hi - lo
        groups = partition_blocks(n, plan.block_rows, plan.partitions)
        current = [params[k] for k in names]

        def task(interp, blocks):
            def run():
                out = []
                for b_lo, b_hi in blocks:
                    xb = slice_matrix(X, lo + b_lo + 1, lo + b_hi)
                    yb = slice_matrix(Y, lo + b_lo + 1, lo + b_hi)
                    res = interp.call_function("gradients", xb, yb, *current, float(i))
                    share = (b_hi - b_lo) / n
                    grads = [as_matrix(g).to_numpy() * share for g in res[:-1]]
                    out.append((grads, float(res[-1]) * share))
                return out
            return run

        per_part = _run_partitions([task(interpreters[j], g) for j, g in enumerate(groups)], plan.partitions)
        total, loss = None, 0.0
        for part in per_part:
            for grads, block_loss in part:
                total = grads if total is None else [a + g for a, g in zip(total, grads)]
                loss += block_loss
        for k, g in zip(names, total):
            params[k], states[k] = optimizer_update(states[k], params[k], Matrix.dense(g))
        result.losses.append(loss)
    result.weights = params
    result.iterations = len(result.losses)
    return result


def initial_weights(program, X, Y, seed: int | None = None) -> dict[str, Matrix]:
    """The seeded initial parameters of a generated training script (``train(X, Y, 0)``)."""
    resolved = _resolve(program)
    fn = resolved.functions["train"]
    values = Interpreter(resolved, seed).call_function("train", X, Y, 0.0)
    values = values if isinstance(values, tuple) else (values,)
    return {r.name: v for r, v in zip(fn.returns, values)}


__all__ = ["MemoryEstimate", "estimate_memory", "SingleNode", "DataParallelBatch", "ParForScoring",
           "ExecutionPlan", "select_plan", "row_partitions", "block_ranges", "partition_blocks",
           "execute_parfor_scoring", "execute_data_parallel_batch", "TrainingResult", "initial_weights",
           "iterations_for"]
