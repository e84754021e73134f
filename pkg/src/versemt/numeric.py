"""Dense array math and the finite-difference gradient oracle.

Matrices are 2-D float64 numpy arrays (row-major), vectors are 1-D.
Shape problems surface as ShapeMismatch instead of numpy broadcasting
accidents, and the activations are guarded against overflow so that
inputs up to |x| ~ 700 stay finite.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import IndexOutOfRange, NonDeterministicLoss, ShapeMismatch

# Floor added inside log() so underflowed probabilities cannot produce -inf.
LOG_EPS = 1e-12


def _as_matrix(a, op: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeMismatch(f"{op}: expected a matrix, got shape {a.shape}")
    return a


def _as_vector(v, op: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeMismatch(f"{op}: expected a vector, got shape {v.shape}")
    return v


def matmul(a, b) -> np.ndarray:
    """Matrix product of two 2-D arrays."""
    a = _as_matrix(a, "matmul")
    b = _as_matrix(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b


def add(a, b) -> np.ndarray:
    """Elementwise sum; operands must have identical shapes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: incompatible shapes {a.shape} and {b.shape}")
    return a + b


def hadamard(a, b) -> np.ndarray:
    """Elementwise product; operands must have identical shapes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"hadamard: incompatible shapes {a.shape} and {b.shape}")
    return a * b


def scale(a, c: float) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) * float(c)


def transpose(a) -> np.ndarray:
    return _as_matrix(a, "transpose").T.copy()


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic function, overflow-safe on both tails."""
    x = np.asarray(x, dtype=np.float64)
    # exp() only ever sees non-positive arguments.
    ex = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))


def tanh_v(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(v) -> np.ndarray:
    """Probability vector via max-subtracted exponentials."""
    v = _as_vector(v, "softmax")
    e = np.exp(v - v.max())
    return e / e.sum()


def cross_entropy(p, target_id: int) -> float:
    """-log p[target_id], with an epsilon floor inside the log."""
    p = _as_vector(p, "cross_entropy")
    if not 0 <= target_id < p.shape[0]:
        raise IndexOutOfRange(f"target id {target_id} outside [0, {p.shape[0]})")
    return float(-np.log(p[target_id] + LOG_EPS))


def finite_diff_grad(
    loss_fn: Callable[[], float],
    params: Sequence,
    h: float = 1e-5,
) -> list[np.ndarray]:
    """Central-difference gradient of loss_fn with respect to each parameter.

    ``params`` are objects with a writable ``.value`` ndarray (or bare
    ndarrays); loss_fn is re-evaluated with each coordinate perturbed by
    +/- h. This is the independent oracle every analytic backward pass is
    checked against, so it never touches the tape machinery.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-6, 1e-4]")
    first = float(loss_fn())
    second = float(loss_fn())
    if first != second:
        raise NonDeterministicLoss(f"loss_fn returned {first} then {second}")

    grads: list[np.ndarray] = []
    for p in params:
        value = p.value if hasattr(p, "value") else p
        flat = value.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn())
            flat[i] = orig - h
            down = float(loss_fn())
            flat[i] = orig
            g[i] = (up - down) / (2.0 * h)
        grads.append(g.reshape(value.shape))
    return grads


def relative_error(a: float, b: float) -> float:
    """|a - b| / max(1, |a|, |b|), the tolerance metric used by gradient checks."""
    return abs(a - b) / max(1.0, abs(a), abs(b))
