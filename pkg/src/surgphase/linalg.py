"""Small dense-math kernels used by every stage of the stack.

All functions take and return 2-D float64 arrays ("matrices", row-major)
and never mutate their inputs.  Internal math is float64 throughout; file
formats narrow to float32 only at the I/O boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def as_matrix(value, name: str = "argument") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting other ranks and non-finite data."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {array.ndim}-D")
    if array.size and not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    return array


def check_finite(array: np.ndarray, name: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    return array


def softmax_rows(matrix) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety."""
    m = as_matrix(matrix, "softmax input")
    if m.size == 0:
        raise ShapeError("softmax input must be non-empty")
    shifted = m - m.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def gelu(matrix) -> np.ndarray:
    """GELU activation (tanh approximation)."""
    x = np.asarray(matrix, dtype=np.float64)
    inner = np.sqrt(2.0 / np.pi) * (x + 0.044715 * (x * x * x))
    return 0.5 * x * (1.0 + np.tanh(inner))


def layer_norm(matrix, gain, shift, eps: float = 1e-5) -> np.ndarray:
    """Normalize each row to zero mean / unit variance, then scale and shift."""
    if eps <= 0.0:
        raise ValueError(f"layer_norm eps must be > 0, got {eps}")
    x = as_matrix(matrix, "layer_norm input")
    g = np.asarray(gain, dtype=np.float64)
    b = np.asarray(shift, dtype=np.float64)
    if g.shape != (x.shape[1],) or b.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm gain/shift must have shape ({x.shape[1]},), "
            f"got {g.shape} and {b.shape}"
        )
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    variance = np.mean(centered * centered, axis=1, keepdims=True)
    return centered / np.sqrt(variance + eps) * g + b


@dataclass(frozen=True)
class LinearLayer:
    """An affine map ``x @ weight.T + bias``; ``weight`` is (out_dim, in_dim)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeError(f"linear weight must be 2-D, got {w.ndim}-D")
        if b.shape != (w.shape[0],):
            raise ShapeError(
                f"linear bias shape {b.shape} does not match weight rows {w.shape[0]}"
            )
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def linear_apply(layer: LinearLayer, matrix) -> np.ndarray:
    x = as_matrix(matrix, "linear input")
    if x.shape[1] != layer.in_dim:
        raise ShapeError(
            f"linear input has {x.shape[1]} columns, layer expects {layer.in_dim}"
        )
    return x @ layer.weight.T + layer.bias


def sigmoid(matrix) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(matrix, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
