"""Dense float64 matrix math, parameter init, Adam, and gradient-check utilities.

A "matrix" throughout this package is a 2-D C-contiguous float64 ndarray.
Everything here is a pure function; nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, NumericError

Matrix = np.ndarray


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce to a 2-D float64 array and verify every entry is finite."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionError(f"{name}: expected 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name}: contains NaN or Inf")
    return np.ascontiguousarray(a)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product; raises DimensionError naming both shapes on mismatch."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    return a @ b


def softmax_over_rows(m: Matrix) -> Matrix:
    """Normalize each column independently across rows.

    out[i, j] = exp(m[i, j]) / sum_r exp(m[r, j]), stabilized by subtracting
    the column max before exponentiation.  Every output column sums to 1.
    """
    if m.size == 0:
        raise ValueError("softmax_over_rows: empty matrix")
    shifted = m - m.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def xavier_init(rows: int, cols: int, seed: int) -> Matrix:
    """Uniform init in +-sqrt(6 / (rows + cols)), deterministic per seed.

    Uses a PCG64 generator so the same seed yields the same matrix on every
    platform and run.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"xavier_init: rows and cols must be >= 1, got ({rows}, {cols})")
    bound = np.sqrt(6.0 / (rows + cols))
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass(frozen=True)
class AdamState:
    """Optimizer state for one parameter matrix.

    Weight decay uses coupled-L2 semantics: it is added to the gradient
    before the moment updates.  With the default 0.5 this is a strong
    regularizer; set weight_decay=0.0 on biases.
    """

    step: int
    first_moment: Matrix
    second_moment: Matrix
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def initial(cls, param: Matrix, learning_rate: float = 1e-4,
                beta1: float = 0.9, beta2: float = 0.999,
                epsilon: float = 1e-8, weight_decay: float = 0.0) -> "AdamState":
        if learning_rate < 0 or weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be >= 0")
        if not (0 < beta1 < 1 and 0 < beta2 < 1 and epsilon > 0):
            raise ValueError("invalid Adam hyperparameters")
        zeros = np.zeros_like(param)
        return cls(step=0, first_moment=zeros, second_moment=zeros.copy(),
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                   epsilon=epsilon, weight_decay=weight_decay)


def adam_step(param: Matrix, grad: Matrix, state: AdamState) -> tuple[Matrix, AdamState]:
    """One Adam update with bias correction; returns (new_param, new_state).

    Effective gradient is grad + weight_decay * param (coupled L2).
    """
    if param.shape != grad.shape or param.shape != state.first_moment.shape:
        raise DimensionError(
            f"adam_step: param {param.shape}, grad {grad.shape}, "
            f"moments {state.first_moment.shape} must all match")
    t = state.step + 1
    g = grad + state.weight_decay * param
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_param = param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_param, replace(state, step=t, first_moment=m, second_moment=v)


def finite_diff_gradient(f, x: Matrix, h: float = 1e-5) -> Matrix:
    """Central-difference gradient of a scalar function, entry by entry.

    grad[i, j] = (f(x + h e_ij) - f(x - h e_ij)) / (2 h).  Raises
    NumericError if f returns a non-finite value anywhere.
    """
    if h <= 0:
        raise ValueError("finite_diff_gradient: h must be > 0")
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = x[idx]
        x[idx] = saved + h
        f_plus = f(x)
        x[idx] = saved - h
        f_minus = f(x)
        x[idx] = saved
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"finite_diff_gradient: non-finite f at index {idx}")
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_relative_error(a: Matrix, b: Matrix) -> float:
    """Max-norm relative error between two arrays of the same shape.

    Scaled by the larger of the two max norms; falls back to the absolute
    difference when both arrays are essentially zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = float(np.max(np.abs(a - b))) if a.size else 0.0
    scale = max(float(np.max(np.abs(a))) if a.size else 0.0,
                float(np.max(np.abs(b))) if b.size else 0.0)
    if scale < 1e-10:
        return diff
    return diff / scale
