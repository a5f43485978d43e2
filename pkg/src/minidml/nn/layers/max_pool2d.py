"""Max-pooling layer on linearized inputs."""

from ... import conv as ops
from ...errors import ShapeError
from ...matrix import Matrix, TensorShape
from .._util import arr


def params(N, C, Hin, Win, Hf, Wf, stride_h, stride_w, pad_h, pad_w) -> ops.PoolParams:
    return ops.PoolParams(TensorShape(int(N), int(C), int(Hin), int(Win)), (int(Hf), int(Wf)),
                          (int(stride_h), int(stride_w)), (int(pad_h), int(pad_w)))


def _as_matrix(x):
    return x if isinstance(x, Matrix) else Matrix.dense(x)


def forward(X, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    """Returns ``(out, Hout, Wout)``."""
    X = _as_matrix(X)
    p = params(X.rows, C, Hin, Win, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    out, _ = ops.maxpool_forward(X, p)
    return out, p.P, p.Q


def backward(dout, Hout, Wout, X, C, Hin, Win, Hf, Wf, stride_h=1, stride_w=1, pad_h=0, pad_w=0):
    # the argmax is recomputed from the cached input, so routing matches forward exactly
    X = _as_matrix(X)
    p = params(X.rows, C, Hin, Win, Hf, Wf, stride_h, stride_w, pad_h, pad_w)
    if (p.P, p.Q) != (int(Hout), int(Wout)):
        raise ShapeError(f"max_pool2d: output extent {int(Hout)}x{int(Wout)} does not match {p.P}x{p.Q}")
    _, argmax = ops.maxpool_forward(X, p)
    return ops.maxpool_backward(argmax, Matrix.dense(arr(dout)), p)
