"""Minimal reverse-mode automatic differentiation over numpy arrays.

Each forward helper computes its result eagerly and pushes one backward
closure onto a Tape; Tape.backward replays the closures in reverse order,
accumulating into the ``grad`` slot of every participating Node. One tape
spans one training objective (typically a batch); model parameters are
long-lived Nodes whose grads are zeroed between optimizer updates.
"""

from __future__ import annotations

import numpy as np

from . import numeric
from .errors import ShapeMismatch


class Node:
    """A value with a same-shaped gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Node(shape={self.value.shape})"


class Tape:
    """Records backward closures in execution order."""

    def __init__(self):
        self._ops = []
        self._used = False

    def record(self, backward_fn) -> None:
        self._ops.append(backward_fn)

    def backward(self, loss: Node) -> None:
        """Seed d(loss)/d(loss) = 1 and replay the record in reverse."""
        if self._used:
            raise RuntimeError("tape already replayed; build a fresh one")
        if loss.value.ndim != 0:
            raise ShapeMismatch(f"backward needs a scalar loss, got {loss.value.shape}")
        self._used = True
        loss.grad = np.asarray(1.0)
        for fn in reversed(self._ops):
            fn()


def _check_same_shape(a: Node, b: Node, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise ShapeMismatch(f"{op}: incompatible shapes {a.value.shape} and {b.value.shape}")


def add(tape: Tape, a: Node, b: Node) -> Node:
    _check_same_shape(a, b, "add")
    out = Node(a.value + b.value)

    def back():
        a.grad += out.grad
        b.grad += out.grad

    tape.record(back)
    return out


def hadamard(tape: Tape, a: Node, b: Node) -> Node:
    _check_same_shape(a, b, "hadamard")
    out = Node(a.value * b.value)

    def back():
        a.grad += out.grad * b.value
        b.grad += out.grad * a.value

    tape.record(back)
    return out


def one_minus(tape: Tape, a: Node) -> Node:
    out = Node(1.0 - a.value)

    def back():
        a.grad -= out.grad

    tape.record(back)
    return out


def scale(tape: Tape, a: Node, c: float) -> Node:
    c = float(c)
    out = Node(a.value * c)

    def back():
        a.grad += out.grad * c

    tape.record(back)
    return out


def sigmoid(tape: Tape, a: Node) -> Node:
    s = numeric.sigmoid(a.value)
    out = Node(s)

    def back():
        a.grad += out.grad * s * (1.0 - s)

    tape.record(back)
    return out


def tanh(tape: Tape, a: Node) -> Node:
    t = np.tanh(a.value)
    out = Node(t)

    def back():
        a.grad += out.grad * (1.0 - t * t)

    tape.record(back)
    return out


def softmax(tape: Tape, v: Node) -> Node:
    p = numeric.softmax(v.value)
    out = Node(p)

    def back():
        g = out.grad
        v.grad += p * (g - g @ p)

    tape.record(back)
    return out


def vecmat(tape: Tape, v: Node, m: Node) -> Node:
    """Row vector times matrix: (n,) @ (n, k) -> (k,)."""
    if v.value.ndim != 1 or m.value.ndim != 2 or v.value.shape[0] != m.value.shape[0]:
        raise ShapeMismatch(f"vecmat: incompatible shapes {v.value.shape} and {m.value.shape}")
    out = Node(v.value @ m.value)

    def back():
        g = out.grad
        v.grad += m.value @ g
        m.grad += np.outer(v.value, g)

    tape.record(back)
    return out


def matvec(tape: Tape, m: Node, v: Node) -> Node:
    """Matrix times column vector: (s, d) @ (d,) -> (s,)."""
    if m.value.ndim != 2 or v.value.ndim != 1 or m.value.shape[1] != v.value.shape[0]:
        raise ShapeMismatch(f"matvec: incompatible shapes {m.value.shape} and {v.value.shape}")
    out = Node(m.value @ v.value)

    def back():
        g = out.grad
        m.grad += np.outer(g, v.value)
        v.grad += m.value.T @ g

    tape.record(back)
    return out


def affine(tape: Tape, x: Node, u: Node, h: Node, w: Node, b: Node) -> Node:
    """Fused gate pre-activation x @ U + h @ W + b, one backward closure."""
    out = Node(x.value @ u.value + h.value @ w.value + b.value)

    def back():
        g = out.grad
        x.grad += u.value @ g
        u.grad += np.outer(x.value, g)
        h.grad += w.value @ g
        w.grad += np.outer(h.value, g)
        b.grad += g

    tape.record(back)
    return out


def linear(tape: Tape, v: Node, m: Node, b: Node) -> Node:
    """v @ M + b, the output projection."""
    out = Node(v.value @ m.value + b.value)

    def back():
        g = out.grad
        v.grad += m.value @ g
        m.grad += np.outer(v.value, g)
        b.grad += g

    tape.record(back)
    return out


def concat(tape: Tape, a: Node, b: Node) -> Node:
    out = Node(np.concatenate([a.value, b.value]))
    na = a.value.shape[0]

    def back():
        a.grad += out.grad[:na]
        b.grad += out.grad[na:]

    tape.record(back)
    return out


def stack_rows(tape: Tape, rows: list[Node]) -> Node:
    out = Node(np.stack([r.value for r in rows]))

    def back():
        for i, r in enumerate(rows):
            r.grad += out.grad[i]

    tape.record(back)
    return out


def pick_row(tape: Tape, m: Node, i: int) -> Node:
    """Row lookup with scatter-add backward (embedding gather)."""
    out = Node(m.value[i].copy())

    def back():
        m.grad[i] += out.grad

    tape.record(back)
    return out


def neg_log_pick(tape: Tape, p: Node, i: int) -> Node:
    """Cross-entropy against a single index: -log(p[i] + eps), scalar."""
    denom = p.value[i] + numeric.LOG_EPS
    out = Node(-np.log(denom))

    def back():
        p.grad[i] -= out.grad / denom

    tape.record(back)
    return out
