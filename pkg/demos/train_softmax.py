"""Softmax classifier end to end: describe, translate, train, score.

Run with ``python3 demos/train_softmax.py``. The generated training script is
the fixed form of the classic minibatch-SGD softmax script; it is printed, run
by the interpreter on a seeded separable dataset, and its weights are then
used by the generated prediction script.
"""

import numpy as np

from minidml.datasets import separable
from minidml.dsl import Interpreter
from minidml.planner import estimate_memory, select_plan
from minidml.translator import ModelSpec, generate_prediction_script, generate_training_script

spec = ModelSpec.from_dict({
    "input_shape": [4],
    "layers": [{"kind": "dense", "units": 2, "activation": "softmax"}],
    "optimizer": {"kind": "sgd", "lr": 0.01},
    "training": {"batch_size": 32, "epochs": 10},
})

X, Y = separable(512, 4, seed=7)
train_script = generate_training_script(spec)
print(train_script)

est = estimate_memory(spec, X.shape, batch_size=32)
print(f"estimated working set: {est.total_bytes} bytes -> plan {select_plan(est)}")

env = Interpreter(train_script, seed=7).run({"X": X, "Y": Y})
W, b = env["W"], env["b"]

predict_script, hint = generate_prediction_script(spec)
probs = Interpreter(predict_script).run({"X": X, "W": W, "b": b})["probs"].to_numpy()
acc = np.mean(probs.argmax(1) == Y.argmax(1))
print(f"training accuracy after 10 epochs: {acc:.4f} (prediction strategy: {hint.strategy})")
