"""Vector storage and the two similarity kernels everything else builds on.

Vectors live in float32, row-major. Runtime scoring accumulates in float32
(BLAS order, which must agree with sequential accumulation within 1e-4
relative); oracle and construction paths may request float64 accumulation
via ``high_precision``.

Ordering convention: inner product, larger is better; squared Euclidean
distance, smaller is better. All ties everywhere break toward the lower
vector id, which makes every comparator a strict total order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UsageError


class MetricKind(enum.Enum):
    INNER_PRODUCT = "ip"
    EUCLIDEAN = "l2"

    @property
    def larger_is_better(self) -> bool:
        return self is MetricKind.INNER_PRODUCT


@dataclass(frozen=True)
class Dataset:
    """n finite float32 vectors of fixed dimension in one contiguous block."""

    data: np.ndarray  # (n, dim) float32, C-contiguous

    def __post_init__(self):
        d = self.data
        if d.ndim != 2:
            raise UsageError(f"dataset array must be 2-D, got shape {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise UsageError(f"dataset needs n >= 1 and dim >= 1, got {d.shape}")
        if d.dtype != np.float32 or not d.flags.c_contiguous:
            raise UsageError("dataset array must be C-contiguous float32")
        if not np.isfinite(d).all():
            raise UsageError("dataset contains NaN or Inf values")

    @classmethod
    def from_array(cls, arr) -> "Dataset":
        """Copy/convert any array-like into a valid Dataset."""
        a = np.ascontiguousarray(np.asarray(arr, dtype=np.float32))
        if a.ndim == 1:
            a = a.reshape(1, -1)
        return cls(a)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def vector(self, i: int) -> np.ndarray:
        return self.data[i]


def _as_vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float32)
    if v.ndim != 1:
        raise UsageError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def _check_dims(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[0] != y.shape[0]:
        raise UsageError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")


def inner_product(x, y) -> float:
    """Sum_i x_i * y_i in float32 accumulation."""
    xv, yv = _as_vec(x), _as_vec(y)
    _check_dims(xv, yv)
    return float(np.dot(xv, yv))


def euclidean_sq(x, y) -> float:
    """Sum_i (x_i - y_i)^2 in float32 accumulation."""
    xv, yv = _as_vec(x), _as_vec(y)
    _check_dims(xv, yv)
    diff = xv - yv
    return float(np.dot(diff, diff))


def norm(x) -> float:
    """Euclidean norm sqrt(<x, x>)."""
    xv = _as_vec(x)
    return float(np.sqrt(np.dot(xv, xv)))


def score(metric: MetricKind, q, x) -> float:
    """Raw similarity score of x against query q under the given metric."""
    if metric is MetricKind.INNER_PRODUCT:
        return inner_product(q, x)
    return euclidean_sq(q, x)


def sort_key(metric: MetricKind, raw_score: float, vid: int) -> tuple[float, int]:
    """Key tuple that sorts ascending = best-first under either metric."""
    if metric.larger_is_better:
        return (-raw_score, vid)
    return (raw_score, vid)


def is_better(metric: MetricKind, score_a: float, id_a: int,
              score_b: float, id_b: int) -> bool:
    """Strict total order: does (score_a, id_a) beat (score_b, id_b)?"""
    return sort_key(metric, score_a, id_a) < sort_key(metric, score_b, id_b)


def score_batch(metric: MetricKind, q: np.ndarray, block: np.ndarray,
                high_precision: bool = False) -> np.ndarray:
    """Score every row of ``block`` against q; float64 when high_precision."""
    dtype = np.float64 if high_precision else np.float32
    qv = np.asarray(q, dtype=dtype)
    rows = np.asarray(block, dtype=dtype)
    if rows.shape[-1] != qv.shape[0]:
        raise UsageError(f"dimension mismatch: {rows.shape[-1]} vs {qv.shape[0]}")
    if metric is MetricKind.INNER_PRODUCT:
        return rows @ qv
    diff = rows - qv
    return np.einsum("ij,ij->i", diff, diff)
