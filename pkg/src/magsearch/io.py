"""fvecs/ivecs binary formats plus the exact brute-force search oracle.

File layout (little-endian): each record is a 4-byte signed int ``d``
followed by ``d`` 4-byte values — float32 for fvecs, int32 for ivecs.
All records in a file must share ``d``. The oracle accumulates in float64
so ground truth out-precisions the float32 engine.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UsageError
from .metrics import Dataset, MetricKind


def _read_records(path: str, value_dtype) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0:
        raise FormatError(f"{path}: empty file (need at least one record)")
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated record header")
    dim = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise FormatError(f"{path}: record dimension {dim} is not positive")
    rec_size = 4 + 4 * dim
    if len(raw) % rec_size != 0:
        raise FormatError(f"{path}: file size {len(raw)} is not a multiple of "
                          f"record size {rec_size} (truncated record?)")
    n = len(raw) // rec_size
    rec_dtype = np.dtype([("dim", "<i4"), ("vec", value_dtype, (dim,))])
    records = np.frombuffer(raw, dtype=rec_dtype, count=n)
    if not (records["dim"] == dim).all():
        bad = int(np.nonzero(records["dim"] != dim)[0][0])
        raise FormatError(f"{path}: record {bad} has dimension "
                          f"{int(records['dim'][bad])}, expected {dim}")
    return np.ascontiguousarray(records["vec"])


def read_fvecs(path: str) -> Dataset:
    """Load an fvecs file into a Dataset."""
    return Dataset(_read_records(path, "<f4").astype(np.float32))


def read_ivecs(path: str) -> np.ndarray:
    """Load an ivecs file as an (n, d) int32 array."""
    return _read_records(path, "<i4").astype(np.int32)


def _write_records(rows: np.ndarray, path: str, value_dtype) -> None:
    n, dim = rows.shape
    out = np.empty((n, dim + 1), dtype="<i4")
    out[:, 0] = dim
    out[:, 1:] = rows.astype(value_dtype).view("<i4")
    with open(path, "wb") as f:
        f.write(out.tobytes())


def write_fvecs(dataset: Dataset, path: str) -> None:
    _write_records(dataset.data, path, "<f4")


def write_ivecs(rows: np.ndarray, path: str) -> None:
    rows = np.asarray(rows, dtype=np.int32)
    if rows.ndim != 2:
        raise UsageError(f"ivecs rows must be 2-D, got shape {rows.shape}")
    _write_records(rows, path, "<i4")


@dataclass
class GroundTruth:
    """Per-query top-k ids, best-first under the stated metric."""

    k: int
    rows: np.ndarray  # (n_queries, k) int32
    metric: MetricKind = MetricKind.INNER_PRODUCT

    def validate(self, n: int | None = None) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != self.k:
            raise UsageError(f"ground truth rows must be (n_queries, {self.k})")
        for i, row in enumerate(self.rows):
            if len(np.unique(row)) != self.k:
                raise UsageError(f"ground truth row {i} has duplicate ids")
        if n is not None and ((self.rows < 0) | (self.rows >= n)).any():
            raise UsageError(f"ground truth ids out of range [0, {n})")


def save_ground_truth(gt: GroundTruth, path: str) -> None:
    write_ivecs(gt.rows, path)


def load_ground_truth(path: str, metric: MetricKind = MetricKind.INNER_PRODUCT) -> GroundTruth:
    rows = read_ivecs(path)
    return GroundTruth(k=rows.shape[1], rows=rows, metric=metric)


def brute_force_topk(dataset: Dataset, q, k: int, metric: MetricKind) -> np.ndarray:
    """Exact top-k ids by exhaustive scan; the verification oracle.

    float64 accumulation; ties broken by lower id. Best-first order.
    """
    qv = np.asarray(q, dtype=np.float64)
    if qv.ndim != 1 or qv.shape[0] != dataset.dim:
        raise UsageError(f"query dimension {qv.shape} does not match dataset dim {dataset.dim}")
    if not 1 <= k <= dataset.n:
        raise UsageError(f"k={k} out of range [1, {dataset.n}]")
    base = dataset.data.astype(np.float64)
    if metric is MetricKind.INNER_PRODUCT:
        key = -(base @ qv)
    else:
        diff = base - qv
        key = np.einsum("ij,ij->i", diff, diff)
    order = np.argsort(key, kind="stable")  # stable sort = ties by lower id
    return order[:k].astype(np.int32)


def compute_ground_truth(dataset: Dataset, queries: Dataset, k: int,
                         metric: MetricKind) -> GroundTruth:
    """Batch brute_force_topk over a query set."""
    if queries.dim != dataset.dim:
        raise UsageError(f"query dim {queries.dim} != dataset dim {dataset.dim}")
    rows = np.empty((queries.n, k), dtype=np.int32)
    for i in range(queries.n):
        rows[i] = brute_force_topk(dataset, queries.vector(i), k, metric)
    return GroundTruth(k=k, rows=rows, metric=metric)
