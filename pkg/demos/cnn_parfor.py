"""A small CNN under different memory budgets and worker counts.

Run with ``python3 demos/cnn_parfor.py``. Shows how the planner's choice moves
from a single-node plan to data-parallel training as the budget shrinks, that
data-parallel training gives the same weights for any partition count, and
that parallel scoring returns the same predictions as sequential scoring.
"""

import os
import time

import numpy as np

from minidml.config import Config
from minidml.dsl import Interpreter
from minidml.planner import (DataParallelBatch, estimate_memory, execute_data_parallel_batch,
                             execute_parfor_scoring, initial_weights, select_plan)
from minidml.translator import ModelSpec, generate_prediction_script, generate_training_script

spec = ModelSpec.from_dict({
    "input_shape": [1, 12, 12],
    "layers": [{"kind": "conv2d", "filters": 8, "kernel": 3, "pad": 1, "activation": "relu"},
               {"kind": "maxpool", "window": 2, "stride": 2},
               {"kind": "dense", "units": 3, "activation": "softmax"}],
    "optimizer": {"kind": "adam", "lr": 0.01},
    "training": {"train_algo": "batch", "epochs": 5},
})

rng = np.random.default_rng(0)
labels = rng.integers(0, 3, 256)
X = rng.normal(size=(256, 144)) * 0.5
X[np.arange(256), labels * 48 + 20] += 3.0      # one bright pixel per class
Y = np.eye(3)[labels]

est = estimate_memory(spec, X.shape)
for budget in (512 * 2 ** 20, 8 * 2 ** 20, 2 ** 20):
    print(f"budget {budget:>11} bytes: {select_plan(est, Config(memory_budget_bytes=budget))}")

script = generate_training_script(spec)
w0 = initial_weights(script, X, Y, seed=1)
runs = {p: execute_data_parallel_batch(script, w0, X, Y, DataParallelBatch(p, 32), spec.optimizer, epochs=5)
        for p in (1, 2, 4)}
same = all(np.array_equal(runs[p].weights[k].to_numpy(), runs[1].weights[k].to_numpy())
           for p in runs for k in w0)
print(f"losses: {[round(v, 4) for v in runs[1].losses]}; identical across 1/2/4 partitions: {same}")

text, _ = generate_prediction_script(spec)
weights = runs[1].weights
seq = Interpreter(text).run({"X": X, **weights})["probs"].to_numpy()
print(f"cores available: {os.cpu_count()}")
for workers in (1, 2, 4):
    t0 = time.perf_counter()
    out = execute_parfor_scoring(text, weights, X, workers).to_numpy()
    print(f"parfor with {workers} worker(s): {time.perf_counter() - t0:.3f}s, "
          f"equal to sequential: {np.array_equal(out, seq)}")
