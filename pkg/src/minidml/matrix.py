"""Dense / CSR matrix runtime.

``Matrix`` is the single runtime value type: a 2-D float64 matrix stored either
densely (row-major ``numpy`` array) or as canonical CSR (sorted column indices,
no explicit zeros, finite values). The number of non-zeros is computed eagerly
at construction. Matrices are immutable; every operation returns a new one and
routes its result through :func:`decide_format`.

Tensors are linearized by keeping the first dimension as rows: an
``(N, C, H, W)`` tensor is an ``N x (C*H*W)`` matrix, see :class:`TensorShape`.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import instrument
from .errors import BoundsError, ShapeError, SingularMatrixError

__all__ = [
    "Matrix",
    "TensorShape",
    "matmul",
    "elementwise",
    "unary",
    "reduce",
    "solve",
    "slice_matrix",
    "transpose",
    "concat_rows",
    "concat_cols",
    "decide_format",
    "linearize_check",
    "nchw_to_flat",
    "flat_to_nchw",
    "sparsity_threshold",
    "set_sparsity_threshold",
    "use_sparsity_threshold",
    "set_matmul_kernel",
]

_state = threading.local()
_DEFAULT_THRESHOLD = 0.4


def sparsity_threshold() -> float:
    return getattr(_state, "threshold", _DEFAULT_THRESHOLD)


def set_sparsity_threshold(value: float) -> None:
    """Set the process default threshold (applies to threads without an override)."""
    global _DEFAULT_THRESHOLD
    if not 0.0 <= value <= 1.0:
        raise ValueError("sparsity threshold must lie in [0, 1]")
    _DEFAULT_THRESHOLD = float(value)


@contextmanager
def use_sparsity_threshold(value: float):
    """Temporarily override the threshold for the current thread."""
    if not 0.0 <= value <= 1.0:
        raise ValueError("sparsity threshold must lie in [0, 1]")
    old = getattr(_state, "threshold", None)
    _state.threshold = float(value)
    try:
        yield
    finally:
        if old is None:
            del _state.threshold
        else:
            _state.threshold = old


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class Matrix:
    """Immutable 2-D float64 matrix with a dense or CSR payload."""

    __slots__ = ("rows", "cols", "nnz", "_dense", "_csr", "__weakref__")

    def __init__(self, rows: int, cols: int, *, dense=None, csr=None):
        # internal constructor: takes ownership of an already canonical payload
        self.rows = int(rows)
        self.cols = int(cols)
        self._dense = dense
        self._csr = csr
        if dense is not None:
            self.nnz = int(np.count_nonzero(dense))
            nbytes = dense.nbytes
        else:
            self.nnz = int(csr.nnz)
            nbytes = csr.data.nbytes + csr.indices.nbytes + csr.indptr.nbytes
        instrument.on_alloc(self, nbytes)

    # -- construction -------------------------------------------------------

    @classmethod
    def dense(cls, data) -> "Matrix":
        """Dense matrix from a scalar, nested sequence or 2-D array (copied)."""
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"expected a 2-D array, got {arr.ndim}-D")
        return cls._wrap(np.ascontiguousarray(arr))

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Matrix":
        if arr.dtype != np.float64 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        return cls(arr.shape[0], arr.shape[1], dense=_readonly(arr))

    @classmethod
    def sparse(cls, data) -> "Matrix":
        """CSR matrix from a dense array-like or any scipy sparse matrix."""
        if sp.issparse(data):
            csr = sp.csr_array(data, dtype=np.float64, copy=True)
        else:
            arr = np.asarray(data, dtype=np.float64)
            if arr.ndim != 2:
                arr = np.atleast_2d(arr)
            csr = sp.csr_array(arr)
        return cls._wrap_csr(csr)

    @classmethod
    def _wrap_csr(cls, csr) -> "Matrix":
        csr = sp.csr_array(csr, dtype=np.float64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.data.size and not np.all(np.isfinite(csr.data)):
            raise ValueError("CSR payload may only hold finite values")
        csr.indptr = csr.indptr.astype(np.int64)
        csr.indices = csr.indices.astype(np.int64)
        for a in (csr.data, csr.indices, csr.indptr):
            a.setflags(write=False)
        return cls(csr.shape[0], csr.shape[1], csr=csr)

    @classmethod
    def from_csr(cls, rows: int, cols: int, row_ptr, col_idx, values) -> "Matrix":
        """Build from raw CSR arrays, validating every structural invariant."""
        row_ptr = np.asarray(row_ptr, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if row_ptr.shape != (rows + 1,) or row_ptr[0] != 0:
            raise ValueError("row_ptr must have length rows+1 and start at 0")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if not (row_ptr[-1] == len(values) == len(col_idx)):
            raise ValueError("row_ptr[rows] must equal len(values) == len(col_idx)")
        if col_idx.size and (col_idx.min() < 0 or col_idx.max() >= cols):
            raise ValueError("column index out of range")
        for r in range(rows):
            seg = col_idx[row_ptr[r]:row_ptr[r + 1]]
            if np.any(np.diff(seg) <= 0):
                raise ValueError(f"column indices of row {r} are not strictly increasing")
        if np.any(values == 0):
            raise ValueError("explicit zeros may not be stored in CSR")
        if not np.all(np.isfinite(values)):
            raise ValueError("CSR payload may only hold finite values")
        csr = sp.csr_array((values.copy(), col_idx.copy(), row_ptr.copy()), shape=(rows, cols))
        return cls._wrap_csr(csr)

    @classmethod
    def from_coo(cls, rows: int, cols: int, row_idx, col_idx, values) -> "Matrix":
        """Sparse matrix from 0-based triples; duplicates are summed."""
        coo = sp.coo_array(
            (np.asarray(values, dtype=np.float64), (np.asarray(row_idx), np.asarray(col_idx))),
            shape=(rows, cols),
        )
        return cls._wrap_csr(coo.tocsr())

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls._wrap(np.zeros((rows, cols)))

    @classmethod
    def full(cls, value: float, rows: int, cols: int) -> "Matrix":
        return cls._wrap(np.full((rows, cols), float(value)))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls._wrap(np.eye(n))

    @classmethod
    def scalar(cls, value: float) -> "Matrix":
        return cls._wrap(np.array([[float(value)]]))

    # -- accessors -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def is_sparse(self) -> bool:
        return self._csr is not None

    @property
    def format(self) -> str:
        return "sparse" if self.is_sparse else "dense"

    @property
    def row_ptr(self) -> np.ndarray:
        return self._require_csr().indptr

    @property
    def col_idx(self) -> np.ndarray:
        return self._require_csr().indices

    @property
    def values(self) -> np.ndarray:
        return self._require_csr().data

    def _require_csr(self):
        if self._csr is None:
            raise AttributeError("matrix has a dense payload")
        return self._csr

    @property
    def nbytes(self) -> int:
        if self._dense is not None:
            return self._dense.nbytes
        c = self._csr
        return c.data.nbytes + c.indices.nbytes + c.indptr.nbytes

    def to_numpy(self) -> np.ndarray:
        """Read-only dense view (dense payload) or fresh dense copy (CSR)."""
        if self._dense is not None:
            return self._dense
        return _readonly(self._csr.toarray())

    def to_scipy(self):
        """CSR payload as a scipy array (converted if dense)."""
        if self._csr is not None:
            return self._csr
        return sp.csr_array(self._dense)

    def to_dense(self) -> "Matrix":
        if self._dense is not None:
            return self
        return Matrix._wrap(self._csr.toarray())

    def to_sparse(self) -> "Matrix":
        if self._csr is not None:
            return self
        if not np.all(np.isfinite(self._dense)):
            raise ValueError("matrices with non-finite values cannot be stored as CSR")
        return Matrix._wrap_csr(sp.csr_array(self._dense))

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"expected a 1x1 matrix, got {self.rows}x{self.cols}")
        return float(self.to_numpy()[0, 0])

    def row_nonzeros(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values of the non-zeros in row ``r``."""
        if self._csr is not None:
            c = self._csr
            lo, hi = c.indptr[r], c.indptr[r + 1]
            return c.indices[lo:hi], c.data[lo:hi]
        row = self._dense[r]
        idx = np.flatnonzero(row)
        return idx, row[idx]

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols}, {self.format}, nnz={self.nnz})"

    # operator sugar for library users; the DSL calls the functions directly
    def __add__(self, other):
        return elementwise(self, other, "add")

    def __radd__(self, other):
        return elementwise(other, self, "add")

    def __sub__(self, other):
        return elementwise(self, other, "sub")

    def __rsub__(self, other):
        return elementwise(other, self, "sub")

    def __mul__(self, other):
        return elementwise(self, other, "mul")

    def __rmul__(self, other):
        return elementwise(other, self, "mul")

    def __truediv__(self, other):
        return elementwise(self, other, "div")

    def __rtruediv__(self, other):
        return elementwise(other, self, "div")

    def __pow__(self, other):
        return elementwise(self, other, "pow")

    def __neg__(self):
        return elementwise(self, -1.0, "mul")

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Matrix":
        return transpose(self)


def as_matrix(x) -> Matrix:
    if isinstance(x, Matrix):
        return x
    return Matrix.dense(x)


def as_array(x) -> np.ndarray:
    """Dense float64 ndarray view of a Matrix, scalar or array-like."""
    if isinstance(x, Matrix):
        return x.to_numpy()
    arr = np.asarray(x, dtype=np.float64)
    return arr.reshape(1, 1) if arr.ndim == 0 else arr


# -- format decision ----------------------------------------------------------


def decide_format(a: Matrix, threshold: float | None = None) -> Matrix:
    """Store ``a`` sparse iff nnz / (rows*cols) <= threshold and all values are finite."""
    t = sparsity_threshold() if threshold is None else threshold
    size = a.rows * a.cols
    if size == 0:
        return a.to_dense()
    want_sparse = a.nnz / size <= t
    if want_sparse and not a.is_sparse and not np.all(np.isfinite(a._dense)):
        want_sparse = False
    if want_sparse:
        return a.to_sparse()
    return a.to_dense()


# -- matrix multiplication --------------------------------------------------------


def _fixed_order_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # accumulate rank-1 updates in ascending k: each output entry sums its terms
    # in the same order regardless of how many rows ``a`` has
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    if m == 0 or n == 0:
        return out
    tmp = np.empty((m, n))
    for j in range(k):
        np.multiply(a[:, j:j + 1], b[j:j + 1, :], out=tmp)
        out += tmp
    return out


_matmul_kernel: Callable[[np.ndarray, np.ndarray], np.ndarray] = _fixed_order_matmul


def set_matmul_kernel(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray] | None) -> None:
    """Replace the dense-dense kernel (``None`` restores the built-in one).

    The built-in kernel is row-order independent, which is what makes
    partitioned scoring bit-identical to sequential scoring.
    """
    global _matmul_kernel
    _matmul_kernel = _fixed_order_matmul if kernel is None else kernel


def dense_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _matmul_kernel(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Exact matrix product, dispatched on the four dense/sparse combinations."""
    a, b = as_matrix(a), as_matrix(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul shape mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    if a.is_sparse and b.is_sparse:
        out = (a._csr @ b._csr)
        return decide_format(Matrix._wrap_csr(out)) if np.all(np.isfinite(out.data)) else \
            decide_format(Matrix._wrap(out.toarray()))
    if a.is_sparse:
        out = a._csr @ b._dense
    elif b.is_sparse:
        out = a._dense @ b._csr
    else:
        out = _matmul_kernel(a._dense, b._dense)
    return decide_format(Matrix._wrap(np.asarray(out)))


# -- elementwise ------------------------------------------------------------------

_BINARY: dict[str, Callable] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "pow": np.power,
    "max": np.maximum,
    "min": np.minimum,
    "mod": lambda x, y: x - np.floor(x / y) * y,
    "intdiv": lambda x, y: np.floor(x / y),
    "lt": lambda x, y: (x < y).astype(np.float64),
    "le": lambda x, y: (x <= y).astype(np.float64),
    "gt": lambda x, y: (x > y).astype(np.float64),
    "ge": lambda x, y: (x >= y).astype(np.float64),
    "eq": lambda x, y: (x == y).astype(np.float64),
    "ne": lambda x, y: (x != y).astype(np.float64),
    "and": lambda x, y: ((x != 0) & (y != 0)).astype(np.float64),
    "or": lambda x, y: ((x != 0) | (y != 0)).astype(np.float64),
}

BINARY_OPS = frozenset(_BINARY)


def _operand_shape(x) -> tuple[int, int]:
    if isinstance(x, Matrix):
        return x.shape
    return (1, 1)


def _broadcast_shape(sa, sb) -> tuple[int, int]:
    if sa == sb:
        return sa
    if sb == (1, 1):
        return sa
    if sa == (1, 1):
        return sb
    # one operand must be a row or column vector conforming with the other
    for big, small in ((sa, sb), (sb, sa)):
        if small == (1, big[1]) or small == (big[0], 1):
            return big
    raise ShapeError(f"cannot broadcast {sa[0]}x{sa[1]} with {sb[0]}x{sb[1]}")


def elementwise(a, b, op: str) -> Matrix:
    """Apply a binary cell-wise operation with scalar / row / column broadcasting.

    Either operand may be a Python scalar. Division follows IEEE semantics.
    """
    fn = _BINARY.get(op)
    if fn is None:
        raise ValueError(f"unknown elementwise op {op!r}")
    if not isinstance(a, Matrix) and not isinstance(b, Matrix):
        raise TypeError("elementwise needs at least one Matrix operand")
    shape = _broadcast_shape(_operand_shape(a), _operand_shape(b))

    fast = _sparse_scalar_path(a, b, op)
    if fast is not None:
        return decide_format(fast)
    if (op == "mul" and isinstance(a, Matrix) and isinstance(b, Matrix)
            and (a.is_sparse or b.is_sparse) and a.shape == b.shape):
        sparse_side, other = (a, b) if a.is_sparse else (b, a)
        if other.is_sparse or np.all(np.isfinite(other._dense)):
            prod = sparse_side._csr.multiply(other._csr if other.is_sparse else other._dense)
            return decide_format(Matrix._wrap_csr(sp.csr_array(prod)))

    xa = _np_operand(a)
    xb = _np_operand(b)
    with np.errstate(all="ignore"):
        out = fn(xa, xb)
    out = np.broadcast_to(out, shape)
    return decide_format(Matrix._wrap(np.array(out, dtype=np.float64)))


def _np_operand(x):
    if isinstance(x, Matrix):
        return x.to_numpy()
    return np.float64(x)


def _sparse_scalar_path(a, b, op):
    # sparse matrix with a finite scalar on the right, for ops that map 0 to 0
    if not (isinstance(a, Matrix) and a.is_sparse) or isinstance(b, Matrix):
        return None
    s = float(b)
    if not np.isfinite(s):
        return None
    if op == "mul" or (op == "div" and s != 0.0) or (op == "pow" and s > 0.0):
        with np.errstate(all="ignore"):
            data = _BINARY[op](a._csr.data, s)
        if not np.all(np.isfinite(data)):
            return None
        csr = sp.csr_array((data, a._csr.indices.copy(), a._csr.indptr.copy()), shape=a.shape)
        return Matrix._wrap_csr(csr)
    return None


_UNARY: dict[str, tuple[Callable, bool]] = {
    # name: (function, maps zero to zero)
    "neg": (np.negative, True),
    "abs": (np.abs, True),
    "sqrt": (np.sqrt, True),
    "exp": (np.exp, False),
    "log": (np.log, False),
    "sign": (np.sign, True),
    "round": (np.round, True),
    "floor": (np.floor, True),
    "ceil": (np.ceil, True),
    "sin": (np.sin, True),
    "cos": (np.cos, False),
    "tanh": (np.tanh, True),
    "sigmoid": (lambda x: 1.0 / (1.0 + np.exp(-x)), False),
    "not": (lambda x: (x == 0).astype(np.float64), False),
}

UNARY_OPS = frozenset(_UNARY)


def unary(a: Matrix, op: str) -> Matrix:
    fn, zero_safe = _UNARY[op]
    with np.errstate(all="ignore"):
        if a.is_sparse and zero_safe:
            data = fn(a._csr.data)
            if np.all(np.isfinite(data)):
                csr = sp.csr_array((data, a._csr.indices.copy(), a._csr.indptr.copy()), shape=a.shape)
                return decide_format(Matrix._wrap_csr(csr))
        out = fn(a.to_numpy())
    return decide_format(Matrix._wrap(np.array(out, dtype=np.float64)))


# -- reductions ------------------------------------------------------------------


def reduce(a: Matrix, kind: str, axis: str = "all") -> Matrix:
    """Sum / mean / min / max over everything, each row, or each column.

    ``axis="rows"`` yields a ``rows x 1`` column vector, ``"cols"`` a
    ``1 x cols`` row vector. Implicit zeros of a CSR matrix take part in
    min and max.
    """
    if kind not in ("sum", "mean", "min", "max"):
        raise ValueError(f"unknown reduction {kind!r}")
    if axis not in ("all", "rows", "cols"):
        raise ValueError(f"unknown axis {axis!r}")
    if a.rows == 0 or a.cols == 0:
        raise ShapeError("cannot reduce an empty matrix")
    np_axis = {"all": None, "rows": 1, "cols": 0}[axis]
    if a.is_sparse:
        c = a._csr
        if kind == "sum":
            out = c.sum(axis=np_axis)
        elif kind == "mean":
            count = {None: a.size, 1: a.cols, 0: a.rows}[np_axis]
            out = np.asarray(c.sum(axis=np_axis)) / count
        else:
            out = getattr(c, kind)(axis=np_axis)
            if sp.issparse(out):
                out = out.toarray()
        out = np.asarray(out, dtype=np.float64)
    else:
        x = a._dense
        out = {"sum": np.sum, "mean": np.mean, "min": np.min, "max": np.max}[kind](x, axis=np_axis)
    if axis == "all":
        out = np.asarray(out).reshape(1, 1)
    elif axis == "rows":
        out = np.asarray(out).reshape(a.rows, 1)
    else:
        out = np.asarray(out).reshape(1, a.cols)
    return decide_format(Matrix._wrap(np.array(out, dtype=np.float64)))


# -- solve -------------------------------------------------------------------------


def solve(a: Matrix, b: Matrix) -> Matrix:
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting."""
    a, b = as_matrix(a), as_matrix(b)
    if a.rows != a.cols:
        raise ShapeError(f"solve needs a square matrix, got {a.rows}x{a.cols}")
    if b.rows != a.rows:
        raise ShapeError(f"solve shape mismatch: {a.rows}x{a.cols} with right-hand side {b.rows}x{b.cols}")
    n = a.rows
    m = np.array(a.to_numpy(), dtype=np.float64)
    x = np.array(b.to_numpy(), dtype=np.float64)
    scale = np.max(np.abs(m)) if m.size else 0.0
    tol = 1e-12 * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        if scale == 0.0 or abs(m[p, k]) < tol:
            raise SingularMatrixError(f"matrix is singular to working precision (pivot column {k + 1})")
        if p != k:
            m[[k, p]] = m[[p, k]]
            x[[k, p]] = x[[p, k]]
        if k + 1 < n:
            factors = m[k + 1:, k] / m[k, k]
            m[k + 1:, k:] -= np.outer(factors, m[k, k:])
            x[k + 1:] -= np.outer(factors, x[k])
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            x[k] -= m[k, k + 1:] @ x[k + 1:]
        x[k] /= m[k, k]
    return decide_format(Matrix._wrap(x))


# -- slicing / reshaping ------------------------------------------------------------


def _check_range(lo, hi, extent, axis):
    lo = 1 if lo is None else int(lo)
    hi = extent if hi is None else int(hi)
    for v in (lo, hi):
        if v < 1 or v > extent:
            raise BoundsError(f"{axis} index {v} out of bounds for extent {extent}")
    if lo > hi:
        raise BoundsError(f"empty {axis} range {lo}:{hi} (extent {extent})")
    return lo - 1, hi


def slice_matrix(a: Matrix, row_lo=None, row_hi=None, col_lo=None, col_hi=None) -> Matrix:
    """Copy of the 1-based inclusive sub-range; ``None`` means the full extent."""
    r0, r1 = _check_range(row_lo, row_hi, a.rows, "row")
    c0, c1 = _check_range(col_lo, col_hi, a.cols, "column")
    if a.is_sparse:
        return decide_format(Matrix._wrap_csr(a._csr[r0:r1, c0:c1]))
    return decide_format(Matrix._wrap(np.array(a._dense[r0:r1, c0:c1])))


def transpose(a: Matrix) -> Matrix:
    if a.is_sparse:
        return decide_format(Matrix._wrap_csr(a._csr.T.tocsr()))
    return decide_format(Matrix._wrap(np.array(a._dense.T)))


def concat_rows(parts: Sequence[Matrix]) -> Matrix:
    parts = [as_matrix(p) for p in parts]
    if not parts:
        raise ShapeError("nothing to concatenate")
    cols = {p.cols for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"row concatenation needs equal column counts, got {sorted(cols)}")
    if all(p.is_sparse for p in parts):
        return decide_format(Matrix._wrap_csr(sp.vstack([p._csr for p in parts], format="csr")))
    return decide_format(Matrix._wrap(np.vstack([p.to_numpy() for p in parts])))


def concat_cols(parts: Sequence[Matrix]) -> Matrix:
    parts = [as_matrix(p) for p in parts]
    if not parts:
        raise ShapeError("nothing to concatenate")
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"column concatenation needs equal row counts, got {sorted(rows)}")
    return decide_format(Matrix._wrap(np.hstack([p.to_numpy() for p in parts])))


def reshape(a: Matrix, rows: int, cols: int) -> Matrix:
    """Row-major reshape."""
    if rows * cols != a.size:
        raise ShapeError(f"cannot reshape {a.rows}x{a.cols} into {rows}x{cols}")
    return decide_format(Matrix._wrap(np.array(a.to_numpy().reshape(rows, cols))))


# -- tensor linearization ---------------------------------------------------------


@dataclass(frozen=True)
class TensorShape:
    """``(N, C, H, W)`` tensor stored as an ``N x (C*H*W)`` matrix."""

    n: int
    c: int
    h: int
    w: int

    def __post_init__(self):
        for name in ("n", "c", "h", "w"):
            if int(getattr(self, name)) < 1:
                raise ShapeError(f"tensor dimension {name} must be >= 1, got {getattr(self, name)}")

    @property
    def cols(self) -> int:
        return self.c * self.h * self.w

    @property
    def matrix_shape(self) -> tuple[int, int]:
        return (self.n, self.cols)

    def nchw_to_flat(self, c: int, h: int, w: int) -> int:
        return nchw_to_flat(self, c, h, w)

    def flat_to_nchw(self, col: int) -> tuple[int, int, int]:
        return flat_to_nchw(self, col)


def nchw_to_flat(shape: TensorShape, c: int, h: int, w: int) -> int:
    """0-based column of element ``(c, h, w)`` within one linearized row."""
    if not (0 <= c < shape.c and 0 <= h < shape.h and 0 <= w < shape.w):
        raise BoundsError(f"index ({c}, {h}, {w}) outside ({shape.c}, {shape.h}, {shape.w})")
    return (c * shape.h + h) * shape.w + w


def flat_to_nchw(shape: TensorShape, col: int) -> tuple[int, int, int]:
    if not 0 <= col < shape.cols:
        raise BoundsError(f"column {col} out of bounds for extent {shape.cols}")
    c, rest = divmod(col, shape.h * shape.w)
    h, w = divmod(rest, shape.w)
    return c, h, w


def linearize_check(shape: TensorShape, m: Matrix) -> bool:
    return m.rows == shape.n and m.cols == shape.cols
