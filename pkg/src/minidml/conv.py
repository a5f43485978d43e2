"""im2col-lowered convolution and max-pooling on linearized tensors.

Inputs are ``N x (C*H*W)`` matrices, filters ``K x (C*R*S)``, outputs
``N x (K*P*Q)`` where ``P = (H + 2*pad_h - R) / stride_h + 1`` (and likewise
``Q``). Patch matrices are ``(C*R*S) x (P*Q)`` with column ``j`` holding the
receptive field of output position ``j`` (row-major over ``P`` then ``Q``).

``conv2d_forward`` picks one of four physical operators from the storage
formats of input and filter. Each operator records the multiply-adds it
performs; see :func:`conv_diagnostics`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import instrument
from .errors import ShapeError
from .matrix import Matrix, TensorShape, decide_format, dense_matmul

__all__ = [
    "ConvParams",
    "PoolParams",
    "im2col",
    "col2im",
    "conv2d_forward",
    "conv2d_backward_filter",
    "conv2d_backward_data",
    "maxpool_forward",
    "maxpool_backward",
    "conv_diagnostics",
    "reset_conv_diagnostics",
    "VARIANTS",
]

VARIANTS = ("dense_dense", "sparse_dense", "dense_sparse", "sparse_sparse")


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ShapeError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _out_extent(size, k, stride, pad, axis):
    if stride < 1:
        raise ShapeError(f"stride along {axis} must be >= 1")
    if pad < 0:
        raise ShapeError(f"padding along {axis} must be >= 0")
    span = size + 2 * pad - k
    if k < 1 or span < 0:
        raise ShapeError(f"window of {k} along {axis} exceeds padded extent {size + 2 * pad}")
    if span % stride:
        raise ShapeError(
            f"non-integral output extent along {axis}: ({size} + 2*{pad} - {k}) / {stride} + 1")
    return span // stride + 1


@dataclass(frozen=True)
class ConvParams:
    shape_in: TensorShape
    filters: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "pad", _pair(self.pad))
        if self.filters < 1:
            raise ShapeError("number of filters must be >= 1")
        self.P, self.Q  # validates extents

    @property
    def P(self) -> int:
        return _out_extent(self.shape_in.h, self.kernel[0], self.stride[0], self.pad[0], "height")

    @property
    def Q(self) -> int:
        return _out_extent(self.shape_in.w, self.kernel[1], self.stride[1], self.pad[1], "width")

    @property
    def shape_out(self) -> TensorShape:
        return TensorShape(self.shape_in.n, self.filters, self.P, self.Q)

    @property
    def patch_rows(self) -> int:
        return self.shape_in.c * self.kernel[0] * self.kernel[1]

    @property
    def filter_shape(self) -> tuple[int, int]:
        return (self.filters, self.patch_rows)

    def with_batch(self, n: int) -> "ConvParams":
        s = self.shape_in
        return ConvParams(TensorShape(n, s.c, s.h, s.w), self.filters, self.kernel, self.stride, self.pad)

    def _geometry(self):
        s = self.shape_in
        return _geometry(s.c, s.h, s.w, *self.kernel, *self.stride, *self.pad)


@dataclass(frozen=True)
class PoolParams:
    shape_in: TensorShape
    window: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "window", _pair(self.window))
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "pad", _pair(self.pad))
        self.P, self.Q

    @property
    def P(self) -> int:
        return _out_extent(self.shape_in.h, self.window[0], self.stride[0], self.pad[0], "height")

    @property
    def Q(self) -> int:
        return _out_extent(self.shape_in.w, self.window[1], self.stride[1], self.pad[1], "width")

    @property
    def shape_out(self) -> TensorShape:
        return TensorShape(self.shape_in.n, self.shape_in.c, self.P, self.Q)

    def with_batch(self, n: int) -> "PoolParams":
        s = self.shape_in
        return PoolParams(TensorShape(n, s.c, s.h, s.w), self.window, self.stride, self.pad)

    def _geometry(self):
        s = self.shape_in
        return _geometry(s.c, s.h, s.w, *self.window, *self.stride, *self.pad)


class _Geometry:
    """Index maps shared by every sample of one convolution shape."""

    def __init__(self, c, h, w, r, s, sh, sw, ph, pw):
        p = (h + 2 * ph - r) // sh + 1
        q = (w + 2 * pw - s) // sw + 1
        self.chw = c * h * w
        self.crs = c * r * s
        self.pq = p * q
        cc, rr, ss = np.meshgrid(np.arange(c), np.arange(r), np.arange(s), indexing="ij")
        pp, qq = np.meshgrid(np.arange(p), np.arange(q), indexing="ij")
        hi = rr.reshape(-1, 1) + sh * pp.reshape(1, -1) - ph
        wi = ss.reshape(-1, 1) + sw * qq.reshape(1, -1) - pw
        inside = (hi >= 0) & (hi < h) & (wi >= 0) & (wi < w)
        flat = (cc.reshape(-1, 1) * h + hi) * w + wi
        # padded positions point at the extra slot appended after each input row
        self.gather = np.where(inside, flat, self.chw).astype(np.int64)
        self.gather.setflags(write=False)
        # inverse map: positions in the flattened patch matrix fed by each input cell
        g = self.gather.ravel()
        order = np.argsort(g, kind="stable")
        counts = np.bincount(g, minlength=self.chw + 1)
        self.inv_positions = order
        self.inv_start = np.concatenate(([0], np.cumsum(counts)))
        self.inv_count = counts


@lru_cache(maxsize=256)
def _geometry(c, h, w, r, s, sh, sw, ph, pw) -> _Geometry:
    return _Geometry(c, h, w, r, s, sh, sw, ph, pw)


# -- diagnostics ---------------------------------------------------------------

_diag_lock = threading.Lock()
_flops = {v: 0 for v in VARIANTS}
_calls = {v: 0 for v in VARIANTS}


def _record(variant: str, flops: int) -> None:
    with _diag_lock:
        _flops[variant] += int(flops)
        _calls[variant] += 1


def conv_diagnostics() -> dict:
    """Cumulative multiply-add counts and call counts per physical operator."""
    with _diag_lock:
        return {"flops": dict(_flops), "calls": dict(_calls)}


def reset_conv_diagnostics() -> None:
    with _diag_lock:
        for v in VARIANTS:
            _flops[v] = 0
            _calls[v] = 0


# -- lowering ------------------------------------------------------------------------


def _patches_dense(x: np.ndarray, geo: _Geometry, fill: float = 0.0) -> np.ndarray:
    """(N, CRS, PQ) patch tensor of a dense ``N x CHW`` input."""
    n = x.shape[0]
    ext = np.empty((n, geo.chw + 1))
    ext[:, :geo.chw] = x
    ext[:, geo.chw] = fill
    return ext[:, geo.gather]


def _patches_sparse(x: Matrix, geo: _Geometry):
    """Sparse ``CRS x (N*PQ)`` patch matrix built only from the input non-zeros."""
    csr = x.to_scipy()
    n = x.rows
    counts = geo.inv_count[csr.indices]
    total = int(counts.sum())
    rows = np.empty(total, dtype=np.int64)
    cols = np.empty(total, dtype=np.int64)
    vals = np.repeat(csr.data, counts)
    sample = np.repeat(np.repeat(np.arange(n), np.diff(csr.indptr)), counts)
    # positions of every non-zero, concatenated in storage order
    starts = geo.inv_start[csr.indices]
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    pos = geo.inv_positions[np.repeat(starts, counts) + offs]
    rows[:] = pos // geo.pq
    cols[:] = sample * geo.pq + pos % geo.pq
    patch = sp.csr_array((vals, (rows, cols)), shape=(geo.crs, n * geo.pq))
    patch.sum_duplicates()
    return patch


def _check_input(x: Matrix, shape: TensorShape, what="input"):
    if x.cols != shape.cols:
        raise ShapeError(
            f"{what} has {x.cols} columns, expected C*H*W = {shape.c}*{shape.h}*{shape.w} = {shape.cols}")


def im2col(x_row: Matrix, p: ConvParams) -> Matrix:
    """Patch matrix ``(C*R*S) x (P*Q)`` of a single linearized sample."""
    if x_row.rows != 1:
        raise ShapeError(f"im2col expects a single row, got {x_row.rows} rows")
    _check_input(x_row, p.shape_in)
    geo = p._geometry()
    if x_row.is_sparse:
        return decide_format(Matrix._wrap_csr(_patches_sparse(x_row, geo)))
    return decide_format(Matrix._wrap(np.array(_patches_dense(x_row.to_numpy(), geo)[0])))


def col2im(cols: Matrix, p: ConvParams) -> Matrix:
    """Adjoint of :func:`im2col`: scatter-add patch entries back into a ``1 x CHW`` row."""
    geo = p._geometry()
    if cols.shape != (geo.crs, geo.pq):
        raise ShapeError(f"col2im expects {geo.crs}x{geo.pq} patches, got {cols.rows}x{cols.cols}")
    return decide_format(Matrix._wrap(_col2im(cols.to_numpy()[None], geo)))


def _col2im(dcols: np.ndarray, geo: _Geometry) -> np.ndarray:
    # dcols: (N, CRS, PQ) -> (N, CHW)
    n = dcols.shape[0]
    width = geo.chw + 1
    idx = (np.arange(n)[:, None] * width + geo.gather.ravel()[None, :]).ravel()
    out = np.bincount(idx, weights=dcols.reshape(-1), minlength=n * width)
    return out.reshape(n, width)[:, :geo.chw].copy()


# -- convolution ---------------------------------------------------------------------


def _check_conv(x: Matrix, f: Matrix, p: ConvParams):
    if x.rows != p.shape_in.n:
        raise ShapeError(f"input has {x.rows} rows, expected N = {p.shape_in.n}")
    _check_input(x, p.shape_in)
    if f.shape != p.filter_shape:
        raise ShapeError(
            f"filter is {f.rows}x{f.cols}, expected K x (C*R*S) = {p.filter_shape[0]}x{p.filter_shape[1]}")


def _to_nkpq(out_kn: np.ndarray, n: int, k: int, pq: int) -> np.ndarray:
    # (K, N*PQ) -> (N, K*PQ)
    return np.ascontiguousarray(out_kn.reshape(k, n, pq).transpose(1, 0, 2).reshape(n, k * pq))


def _from_nkpq(d: np.ndarray, n: int, k: int, pq: int) -> np.ndarray:
    # (N, K*PQ) -> (K, N*PQ)
    return np.ascontiguousarray(d.reshape(n, k, pq).transpose(1, 0, 2).reshape(k, n * pq))


def conv2d_forward(x: Matrix, f: Matrix, p: ConvParams) -> Matrix:
    """2-D convolution (cross-correlation) of every sample with every filter."""
    _check_conv(x, f, p)
    geo = p._geometry()
    n, k = x.rows, p.filters
    if x.is_sparse:
        patch = _patches_sparse(x, geo)
        with instrument.scratch(patch.data.nbytes + patch.indices.nbytes + patch.indptr.nbytes):
            if f.is_sparse:
                fc = f.to_scipy()
                col_nnz = np.bincount(fc.indices, minlength=geo.crs)
                flops = int(col_nnz @ np.diff(patch.indptr))  # filter nnz in column r times patch nnz in row r
                out = (fc @ patch).toarray()
                variant = "sparse_sparse"
            else:
                flops = k * patch.nnz
                out = f.to_numpy() @ patch
                variant = "sparse_dense"
    else:
        cols = _patches_dense(x.to_numpy(), geo)
        with instrument.scratch(cols.nbytes * 2):
            cols = np.ascontiguousarray(cols.transpose(1, 0, 2).reshape(geo.crs, n * geo.pq))
            if f.is_sparse:
                fc = f.to_scipy()
                flops = fc.nnz * n * geo.pq
                out = fc @ cols
                variant = "dense_sparse"
            else:
                flops = k * geo.crs * n * geo.pq
                out = dense_matmul(f.to_numpy(), cols)
                variant = "dense_dense"
    _record(variant, flops)
    return decide_format(Matrix._wrap(_to_nkpq(np.asarray(out), n, k, geo.pq)))


def _check_dout(dout: Matrix, n: int, channels: int, pq: int):
    if dout.shape != (n, channels * pq):
        raise ShapeError(f"upstream gradient is {dout.rows}x{dout.cols}, expected {n}x{channels * pq}")


def conv2d_backward_filter(x: Matrix, dout: Matrix, p: ConvParams) -> Matrix:
    """Gradient w.r.t. the filter: sum over samples of ``dout_n @ im2col(x_n).T``."""
    if x.rows != p.shape_in.n:
        raise ShapeError(f"input has {x.rows} rows, expected N = {p.shape_in.n}")
    _check_input(x, p.shape_in)
    geo = p._geometry()
    n, k = x.rows, p.filters
    _check_dout(dout, n, k, geo.pq)
    d = _from_nkpq(dout.to_numpy(), n, k, geo.pq)
    if x.is_sparse:
        patch = _patches_sparse(x, geo)
        df = (patch @ d.T).T
    else:
        cols = _patches_dense(x.to_numpy(), geo)
        with instrument.scratch(cols.nbytes * 2):
            cols = np.ascontiguousarray(cols.transpose(1, 0, 2).reshape(geo.crs, n * geo.pq))
            df = dense_matmul(d, cols.T)
    return decide_format(Matrix._wrap(np.array(df)))


def conv2d_backward_data(f: Matrix, dout: Matrix, p: ConvParams) -> Matrix:
    """Gradient w.r.t. the input: ``col2im(f.T @ dout_n)`` per sample."""
    geo = p._geometry()
    n, k = p.shape_in.n, p.filters
    if f.shape != p.filter_shape:
        raise ShapeError(
            f"filter is {f.rows}x{f.cols}, expected K x (C*R*S) = {p.filter_shape[0]}x{p.filter_shape[1]}")
    _check_dout(dout, n, k, geo.pq)
    d = _from_nkpq(dout.to_numpy(), n, k, geo.pq)
    if f.is_sparse:
        dcols = f.to_scipy().T @ d
    else:
        dcols = dense_matmul(f.to_numpy().T, d)
    with instrument.scratch(dcols.nbytes):
        dcols = np.asarray(dcols).reshape(geo.crs, n, geo.pq).transpose(1, 0, 2)
        dx = _col2im(dcols, geo)
    return decide_format(Matrix._wrap(dx))


# -- max pooling ---------------------------------------------------------------------


def _pool_windows(x: Matrix, p: PoolParams):
    s = p.shape_in
    if x.rows != s.n:
        raise ShapeError(f"input has {x.rows} rows, expected N = {s.n}")
    _check_input(x, s)
    geo = p._geometry()
    rs = p.window[0] * p.window[1]
    vals = _patches_dense(x.to_numpy(), geo, fill=-np.inf)
    gather = geo.gather.reshape(s.c, rs, geo.pq)
    return geo, vals.reshape(x.rows, s.c, rs, geo.pq), gather


def maxpool_forward(x: Matrix, p: PoolParams) -> tuple[Matrix, np.ndarray]:
    """Window maxima plus the flat input column each one came from.

    Ties resolve to the first position in row-major window order. A window
    lying entirely in the padding outputs 0 and has argmax -1.
    """
    geo, vals, gather = _pool_windows(x, p)
    n, c = x.rows, p.shape_in.c
    with instrument.scratch(vals.nbytes):
        best = np.argmax(vals, axis=2)                                  # (N, C, PQ)
        out = np.take_along_axis(vals, best[:, :, None, :], axis=2)[:, :, 0, :]
    src = gather[np.arange(c)[None, :, None], best, np.arange(geo.pq)[None, None, :]]
    empty = np.isneginf(out) | (src == geo.chw)
    out = np.where(empty, 0.0, out)
    argmax = np.where(empty, -1, src).reshape(n, c * geo.pq).astype(np.int64)
    return decide_format(Matrix._wrap(out.reshape(n, c * geo.pq))), argmax


def maxpool_backward(argmax, dout: Matrix, p: PoolParams) -> Matrix:
    """Route each upstream entry to its argmax input cell, summing collisions."""
    s = p.shape_in
    geo = p._geometry()
    argmax = np.asarray(argmax, dtype=np.int64)
    _check_dout(dout, s.n, s.c, geo.pq)
    if argmax.shape != dout.shape:
        raise ShapeError(f"argmax is {argmax.shape[0]}x{argmax.shape[1]}, expected {dout.rows}x{dout.cols}")
    width = geo.chw + 1
    target = np.where(argmax < 0, geo.chw, argmax)
    idx = (np.arange(s.n)[:, None] * width + target).ravel()
    dx = np.bincount(idx, weights=dout.to_numpy().ravel(), minlength=s.n * width)
    return decide_format(Matrix._wrap(dx.reshape(s.n, width)[:, :geo.chw].copy()))
