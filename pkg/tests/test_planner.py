import math

import numpy as np
import pytest

from minidml import instrument
from minidml.config import Config
from minidml.datasets import separable
from minidml.dsl import Interpreter
from minidml.errors import CapacityError, ModelValidationError, ShapeError
from minidml.matrix import Matrix
from minidml.planner import (DataParallelBatch, MemoryEstimate, ParForScoring, SingleNode, block_ranges,
                             estimate_memory, execute_data_parallel_batch, execute_parfor_scoring,
                             initial_weights, iterations_for, partition_blocks, row_partitions, select_plan)
from minidml.translator import (ModelSpec, build_network, generate_prediction_script, generate_training_script,
                                shape_chain)

SOFTMAX = ModelSpec.from_dict({"input_shape": [4], "layers": [{"kind": "dense", "units": 2,
                                                               "activation": "softmax"}]})
CNN = ModelSpec.from_dict({
    "input_shape": [1, 6, 6],
    "layers": [{"kind": "conv2d", "filters": 2, "kernel": 3, "activation": "relu"},
               {"kind": "maxpool", "window": 2},
               {"kind": "dense", "units": 3, "activation": "softmax"}],
    "optimizer": {"kind": "adam", "lr": 0.01}})
MIB = 1024 * 1024


class TestEstimate:
    def test_linear_in_rows(self):
        e = estimate_memory(SOFTMAX, (1000, 4), batch_size=32)
        assert e.rows == 32
        assert e.total_bytes == 32 * e.per_row_bytes + e.fixed_bytes
        assert e.bytes_for(64) - e.bytes_for(32) == 32 * e.per_row_bytes

    def test_items_add_up(self):
        e = estimate_memory(CNN, (10, 36))
        assert sum(p * e.rows + f for _, p, f in e.items) == e.total_bytes
        assert e.item("input") == 10 * 36 * 8
        assert any(name.endswith("im2col") for name, _, _ in e.items)

    def test_optimizer_accumulators_are_fixed_cost(self):
        sgd = estimate_memory(SOFTMAX, (10, 4), optimizer="sgd")
        adam = estimate_memory(SOFTMAX, (10, 4), optimizer="adam")
        assert adam.per_row_bytes == sgd.per_row_bytes
        assert adam.fixed_bytes - sgd.fixed_bytes == 2 * (4 * 2 + 2) * 8

    def test_inference_is_cheaper(self):
        assert estimate_memory(CNN, 10, training=False).total_bytes < estimate_memory(CNN, 10).total_bytes

    def test_accepts_shape_report_and_checks_columns(self):
        e = estimate_memory(shape_chain(CNN), (5, 36), optimizer="adam")
        assert e == estimate_memory(CNN, (5, 36))
        with pytest.raises(ModelValidationError, match="columns"):
            estimate_memory(CNN, (5, 35))

    @pytest.mark.parametrize("spec", [SOFTMAX, CNN], ids=["softmax", "cnn"])
    def test_estimate_bounds_measured_peak(self, spec):
        report = shape_chain(spec)
        rng = np.random.default_rng(0)
        X = Matrix.dense(rng.normal(size=(32, report.features)))
        Y = Matrix.dense(np.eye(report.outputs)[rng.integers(0, report.outputs, 32)])
        it = Interpreter(generate_training_script(spec))
        params = list(build_network(spec, seed=0).params.values())
        with instrument.MemoryTracker() as t:
            it.call_function("gradients", X, Y, *params, 1)
        assert 0 < t.peak <= estimate_memory(spec, (32, report.features)).total_bytes


class TestPlanSelection:
    def test_small_job_single_node(self):
        e = estimate_memory(SOFTMAX, (10_000, 4), batch_size=32)
        assert select_plan(e, Config(memory_budget_bytes=512 * MIB)) == SingleNode()

    def test_tiny_budget_data_parallel(self):
        e = estimate_memory(SOFTMAX, (10 ** 6, 4))
        plan = select_plan(e, Config(memory_budget_bytes=MIB))
        assert isinstance(plan, DataParallelBatch) and plan.partitions >= 2
        blocks = math.ceil(e.rows / plan.block_rows)
        per_partition = plan.block_rows * math.ceil(blocks / plan.partitions)
        assert e.bytes_for(per_partition) <= MIB

    def test_boundary_is_inclusive(self):
        e = MemoryEstimate(100, 10, 50)
        assert select_plan(e, Config(memory_budget_bytes=1050)) == SingleNode()
        assert isinstance(select_plan(e, Config(memory_budget_bytes=1049)), DataParallelBatch)

    def test_capacity_error(self):
        with pytest.raises(CapacityError, match="single row"):
            select_plan(MemoryEstimate(100, 10, 50), Config(memory_budget_bytes=55))

    def test_allreduce_always_parfor(self):
        e = estimate_memory(SOFTMAX, (10, 4), training=False)
        plan = select_plan(e, Config(max_workers=4), test_algo="allreduce")
        assert plan == ParForScoring(4, ((0, 3), (3, 6), (6, 8), (8, 10)))
        assert select_plan(MemoryEstimate(2, 1, 0), Config(max_workers=8), "allreduce").workers == 2

    def test_pure_function(self):
        e = estimate_memory(CNN, (5000, 36))
        cfg = Config(memory_budget_bytes=200_000)
        assert select_plan(e, cfg) == select_plan(e, cfg)

    def test_block_rows_shrink_to_fit(self):
        plan = select_plan(MemoryEstimate(100, 100, 0), Config(memory_budget_bytes=500, block_rows=16))
        assert plan.block_rows == 5


class TestPartitions:
    def test_row_partitions(self):
        assert row_partitions(10, 3) == [(0, 4), (4, 7), (7, 10)]
        assert row_partitions(2, 4) == [(0, 1), (1, 2)]
        with pytest.raises(ValueError):
            row_partitions(5, 0)

    def test_blocks(self):
        assert block_ranges(35, 16) == [(0, 16), (16, 32), (32, 35)]
        assert partition_blocks(35, 16, 2) == [[(0, 16), (16, 32)], [(32, 35)]]

    def test_iterations(self):
        assert iterations_for(100, 3, 32) == 12
        assert iterations_for(100, 3, None) == 3


def _data(n=96, seed=0):
    X, Y = separable(n, 4, seed=seed)
    return Matrix.dense(X), Matrix.dense(Y)


class TestExecutors:
    @pytest.mark.parametrize("spec", [SOFTMAX, CNN], ids=["softmax", "cnn"])
    def test_parfor_matches_sequential(self, spec):
        report = shape_chain(spec)
        X = Matrix.dense(np.random.default_rng(1).normal(size=(37, report.features)))
        weights = build_network(spec, seed=3).params
        text, _ = generate_prediction_script(spec)
        ref = Interpreter(text).run({"X": X, **weights})["probs"].to_numpy()
        for w in (1, 2, 4, 8):
            assert np.array_equal(execute_parfor_scoring(text, weights, X, w).to_numpy(), ref)

    def test_parfor_rejects_bad_partitions_and_weights(self):
        text, _ = generate_prediction_script(SOFTMAX)
        weights = build_network(SOFTMAX, seed=0).params
        X = Matrix.dense(np.ones((6, 4)))
        with pytest.raises(ShapeError):
            execute_parfor_scoring(text, weights, X, ParForScoring(2, ((0, 2), (3, 6))))
        with pytest.raises(ModelValidationError, match="no weights"):
            execute_parfor_scoring(text, {"W": weights["W"]}, X, 2)

    def test_worker_errors_propagate(self):
        src = ("predict = function(matrix[double] X, matrix[double] W) return (matrix[double] P) {\n"
               "  if (nrow(X) < 3) { stop(\"tiny partition\") }\n  P = X %*% W\n}\n")
        with pytest.raises(Exception, match="tiny partition"):
            execute_parfor_scoring(src, {"W": np.ones((4, 1))}, np.ones((5, 4)), 2)

    @pytest.mark.parametrize("spec", [SOFTMAX, CNN], ids=["softmax", "cnn"])
    @pytest.mark.parametrize("batch", [None, 32])
    def test_data_parallel_bit_identical_across_partitions(self, spec, batch):
        report = shape_chain(spec)
        rng = np.random.default_rng(2)
        X = Matrix.dense(rng.normal(size=(80, report.features)))
        Y = Matrix.dense(np.eye(report.outputs)[rng.integers(0, report.outputs, 80)])
        script = generate_training_script(spec)
        w0 = initial_weights(script, X, Y, seed=5)
        runs = [execute_data_parallel_batch(script, w0, X, Y, DataParallelBatch(p, 8), spec.optimizer,
                                            epochs=2, batch_size=batch)
                for p in (1, 2, 4)]
        for r in runs[1:]:
            assert r.losses == runs[0].losses
            for k in w0:
                assert np.array_equal(r.weights[k].to_numpy(), runs[0].weights[k].to_numpy())

    def test_data_parallel_matches_interpreted_script(self):
        spec = ModelSpec.from_dict({"input_shape": [4], "layers": [{"kind": "dense", "units": 2,
                                    "activation": "softmax"}], "training": {"train_algo": "batch", "epochs": 5}})
        X, Y = _data()
        script = generate_training_script(spec)
        w0 = initial_weights(script, X, Y, seed=1)
        dp = execute_data_parallel_batch(script, w0, X, Y, 3, spec.optimizer, epochs=5)
        env = Interpreter(script, seed=1).run({"X": X, "Y": Y})
        for k in w0:
            np.testing.assert_allclose(dp.weights[k].to_numpy(), env[k].to_numpy(), rtol=0, atol=1e-12)
        assert dp.iterations == 5 and dp.losses[-1] < dp.losses[0]

    def test_missing_gradients_function(self):
        with pytest.raises(ModelValidationError, match="gradients"):
            execute_data_parallel_batch("x = 1", {}, np.ones((2, 2)), np.ones((2, 2)), 2, {"kind": "sgd"})
