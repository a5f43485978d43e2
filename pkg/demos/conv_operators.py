"""The four dense/sparse convolution operators side by side.

Run with ``python3 demos/conv_operators.py``. The same convolution is computed
with every input/filter format combination; results agree and the multiply
counts drop as the input gets sparser.
"""

import numpy as np

from minidml.conv import ConvParams, conv2d_forward, conv_diagnostics, reset_conv_diagnostics
from minidml.matrix import Matrix, TensorShape

rng = np.random.default_rng(0)
p = ConvParams(TensorShape(4, 3, 16, 16), filters=8, kernel=3, stride=1, pad=1)
f = rng.normal(size=p.filter_shape)

for sparsity in (0.0, 0.5, 0.95):
    x = rng.normal(size=(4, 3 * 16 * 16)) * (rng.random((4, 768)) >= sparsity)
    reset_conv_diagnostics()
    outs = [conv2d_forward(mx, mf, p).to_numpy()
            for mx in (Matrix.dense(x), Matrix.sparse(x)) for mf in (Matrix.dense(f), Matrix.sparse(f))]
    spread = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
    flops = conv_diagnostics()["flops"]
    print(f"input sparsity {sparsity:.2f}: max disagreement {spread:.1e}, multiplies "
          + ", ".join(f"{k}={v}" for k, v in sorted(flops.items())))
