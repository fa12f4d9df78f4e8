"""Statistical neighborhood reducers and the concat-plus-projection step.

Five column-wise reducers over a neighborhood feature matrix X (rows are the
neighbor feature vectors):

    mean      column means
    median    ascending sort, element at zero-based index floor(rows/2)
              (upper median on even counts; stable sort, so the first
              occurrence wins among ties)
    std       sqrt(biased variance + eps); the eps guards zero variance
    moment3   mean of (x - mu)^3, unnormalized
    moment4   mean of (x - mu)^4, unnormalized

The selected reducers' outputs are concatenated in the order given by
`kinds` (canonical full order: mean, median, std, moment3, moment4 - the
layout is part of the checkpoint contract) and projected through a learned
matrix plus bias.  Backward passes are exact adjoints; the median routes its
gradient to the selected element per column (subgradient choice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import Matrix, xavier_init

KIND_ORDER = ("mean", "median", "std", "moment3", "moment4")

DEFAULT_STD_EPSILON = 1e-5


def agg_mean(X: Matrix) -> Matrix:
    """Column-wise arithmetic mean, shape (1, F)."""
    _check_rows(X)
    return X.mean(axis=0, keepdims=True)


def agg_std(X: Matrix, eps: float = DEFAULT_STD_EPSILON) -> Matrix:
    """Column-wise sqrt(biased variance + eps), shape (1, F)."""
    _check_rows(X)
    centered = X - X.mean(axis=0, keepdims=True)
    var = (centered * centered).mean(axis=0, keepdims=True)
    return np.sqrt(var + eps)


def agg_median(X: Matrix) -> Matrix:
    """Column-wise element at zero-based sorted index floor(rows/2)."""
    _check_rows(X)
    sel = _median_rows(X)
    return X[sel, np.arange(X.shape[1])].reshape(1, -1)


def agg_moment(X: Matrix, m: int) -> Matrix:
    """Column-wise raw central moment of order m (3 or 4), shape (1, F)."""
    _check_rows(X)
    if m not in (3, 4):
        raise ValueError(f"unsupported moment order {m}; only 3 and 4")
    centered = X - X.mean(axis=0, keepdims=True)
    return (centered ** m).mean(axis=0, keepdims=True)


def _check_rows(X: Matrix) -> None:
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"aggregation input must have >= 1 row, got shape {X.shape}")


def _median_rows(X: Matrix) -> np.ndarray:
    """Per column, the source row index of the selected median element."""
    target = X.shape[0] // 2
    order = np.argsort(X, axis=0, kind="stable")
    return order[target, :]


@dataclass
class MultiAggregator:
    """K reducers plus the shared projection of their concatenated outputs."""

    kinds: tuple[str, ...]
    w_proj: Matrix  # (K*F, Fa)
    b_proj: Matrix  # (1, Fa)
    std_epsilon: float = DEFAULT_STD_EPSILON

    def __post_init__(self):
        validate_kinds(self.kinds)
        k, f_in = len(self.kinds), self.input_dim
        if self.w_proj.shape[0] != k * f_in:
            raise DimensionError(
                f"w_proj has {self.w_proj.shape[0]} rows, expected K*F = {k * f_in}")
        if self.b_proj.shape != (1, self.w_proj.shape[1]):
            raise DimensionError(
                f"b_proj shape {self.b_proj.shape} != (1, {self.w_proj.shape[1]})")

    @property
    def input_dim(self) -> int:
        return self.w_proj.shape[0] // len(self.kinds)

    @property
    def output_dim(self) -> int:
        return self.w_proj.shape[1]

    @classmethod
    def create(cls, kinds, feature_dim: int, output_dim: int, seed: int,
               std_epsilon: float = DEFAULT_STD_EPSILON) -> "MultiAggregator":
        kinds = tuple(kinds)
        validate_kinds(kinds)
        return cls(kinds=kinds,
                   w_proj=xavier_init(len(kinds) * feature_dim, output_dim, seed),
                   b_proj=np.zeros((1, output_dim)),
                   std_epsilon=std_epsilon)


def validate_kinds(kinds) -> None:
    kinds = tuple(kinds)
    if not kinds:
        raise ValueError("kinds must be nonempty")
    unknown = [k for k in kinds if k not in KIND_ORDER]
    if unknown:
        raise ValueError(f"unknown aggregation kinds {unknown}; valid: {KIND_ORDER}")
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"duplicate aggregation kinds in {kinds}")


@dataclass
class AggregationTrace:
    """Forward intermediates needed by multi_aggregate_backward."""

    X: Matrix
    mu: Matrix
    centered: Matrix
    concat: Matrix | None = None
    std: Matrix | None = None               # sqrt(var + eps), for "std"
    median_rows: np.ndarray | None = None   # per-column selected row


def multi_aggregate(agg: MultiAggregator, X: Matrix) -> tuple[Matrix, AggregationTrace]:
    """Concatenate the selected reducer outputs and project: (1, Fa) row."""
    _check_rows(X)
    if X.shape[1] != agg.input_dim:
        raise DimensionError(
            f"aggregation input width {X.shape[1]} != expected {agg.input_dim}")
    mu = X.mean(axis=0, keepdims=True)
    centered = X - mu
    trace = AggregationTrace(X=X, mu=mu, centered=centered)
    parts = []
    for kind in agg.kinds:
        if kind == "mean":
            parts.append(mu)
        elif kind == "median":
            trace.median_rows = _median_rows(X)
            parts.append(X[trace.median_rows, np.arange(X.shape[1])].reshape(1, -1))
        elif kind == "std":
            var = (centered * centered).mean(axis=0, keepdims=True)
            trace.std = np.sqrt(var + agg.std_epsilon)
            parts.append(trace.std)
        elif kind == "moment3":
            parts.append((centered ** 3).mean(axis=0, keepdims=True))
        else:  # moment4
            parts.append((centered ** 4).mean(axis=0, keepdims=True))
    trace.concat = np.concatenate(parts, axis=1)
    return trace.concat @ agg.w_proj + agg.b_proj, trace


def multi_aggregate_backward(agg: MultiAggregator, trace: AggregationTrace,
                             upstream: Matrix) -> tuple[Matrix, Matrix, Matrix]:
    """Adjoint of multi_aggregate: (grad_X, grad_w_proj, grad_b_proj).

    Per reducer, with n rows and d = X - mu:
      mean:     dX += g / n
      median:   dX[sel, j] += g[j]
      std:      dX += g * d / (n * std)            [d sqrt(var+eps) chain]
      moment m: dX += g * (m/n) (d^(m-1) - mean(d^(m-1)))   [mu chain included]
    """
    if upstream.shape != (1, agg.output_dim):
        raise DimensionError(
            f"upstream shape {upstream.shape} != (1, {agg.output_dim})")
    X, centered = trace.X, trace.centered
    n, f = X.shape
    grad_b = upstream.copy()
    grad_w = trace.concat.T @ upstream
    grad_concat = upstream @ agg.w_proj.T
    grad_X = np.zeros_like(X)
    for k, kind in enumerate(agg.kinds):
        g = grad_concat[:, k * f:(k + 1) * f]  # (1, F)
        if kind == "mean":
            grad_X += g / n
        elif kind == "median":
            grad_X[trace.median_rows, np.arange(f)] += g[0]
        elif kind == "std":
            grad_X += g * centered / (n * trace.std)
        else:
            m = 3 if kind == "moment3" else 4
            p = centered ** (m - 1)
            grad_X += g * (m / n) * (p - p.mean(axis=0, keepdims=True))
    return grad_X, grad_w, grad_b
