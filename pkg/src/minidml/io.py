"""Matrix ingestion and persistence.

Two text formats:

* dense CSV -- one comma-separated row of floats per line;
* sparse COO -- a header line ``rows cols nnz`` followed by ``row col value``
  triples with 1-based indices.

A weights manifest is a JSON object mapping parameter names to matrix files
relative to the manifest's directory. The file extension picks the format
(``.coo``/``.mtx`` for COO, anything else CSV).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError, WeightsError
from .matrix import Matrix, decide_format

COO_SUFFIXES = (".coo", ".mtx")


def _fmt(v: float) -> str:
    return repr(float(v))


def read_csv(path) -> Matrix:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(f"{path}:{lineno}: expected {width} values, got {len(row)}")
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return decide_format(Matrix.dense(rows))


def write_csv(m: Matrix, path) -> None:
    arr = m.to_numpy()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in arr:
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")


def read_coo(path) -> Matrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("%")]
    if not lines:
        raise FormatError(f"{path}: missing 'rows cols nnz' header")
    try:
        rows, cols, nnz = (int(t) for t in lines[0].split())
    except ValueError:
        raise FormatError(f"{path}: bad header {lines[0]!r}") from None
    body = lines[1:]
    if len(body) != nnz:
        raise FormatError(f"{path}: header announces {nnz} entries, found {len(body)}")
    ri = np.empty(nnz, dtype=np.int64)
    ci = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for k, line in enumerate(body):
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{path}: entry {k + 1} is not a 'row col value' triple")
        r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not (1 <= r <= rows and 1 <= c <= cols):
            raise FormatError(f"{path}: entry ({r}, {c}) outside {rows}x{cols}")
        ri[k], ci[k], vals[k] = r - 1, c - 1, v
    return decide_format(Matrix.from_coo(rows, cols, ri, ci, vals))


def write_coo(m: Matrix, path) -> None:
    if not np.all(np.isfinite(m.to_numpy())):
        raise FormatError("COO output needs finite values")
    s = m.to_sparse()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{m.rows} {m.cols} {s.nnz}\n")
        ptr, idx, vals = s.row_ptr, s.col_idx, s.values
        for r in range(m.rows):
            for k in range(ptr[r], ptr[r + 1]):
                fh.write(f"{r + 1} {idx[k] + 1} {_fmt(vals[k])}\n")


def read_matrix(path) -> Matrix:
    if Path(path).suffix.lower() in COO_SUFFIXES:
        return read_coo(path)
    return read_csv(path)


def write_matrix(m: Matrix, path) -> None:
    if Path(path).suffix.lower() in COO_SUFFIXES:
        write_coo(m, path)
    else:
        write_csv(m, path)


def write_weights(weights: Mapping[str, Matrix], directory, manifest_name: str = "weights.json",
                  sparse: bool = False) -> Path:
    """Export every parameter plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".coo" if sparse else ".csv"
    manifest = {}
    for name in sorted(weights):
        rel = f"{name}{suffix}"
        write_matrix(weights[name], directory / rel)
        manifest[name] = rel
    path = directory / manifest_name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict[str, Path]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise WeightsError(f"cannot read weights manifest {path}: {exc}") from None
    if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
        raise WeightsError(f"{path}: manifest must map parameter names to file paths")
    return {name: path.parent / rel for name, rel in raw.items()}


def read_weights(path) -> dict[str, Matrix]:
    return {name: read_matrix(p) for name, p in read_manifest(path).items()}
