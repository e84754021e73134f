"""Gated recurrent cells (LSTM and GRU) with tape-recorded steps.

Shapes follow the row-vector convention used throughout the package:
an input x is (d_in,), a hidden state is (d_h,), input projections U_*
are (d_in, d_h) and recurrent projections W_* are (d_h, d_h). Both cell
types expose the same step interface and are interchangeable everywhere
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .errors import EmptySequence, ShapeMismatch

INIT_RANGE = 0.1  # uniform(-0.1, 0.1) weight init
FORGET_BIAS = 1.0


@dataclass
class CellState:
    """Hidden state h, plus the internal memory c for LSTM (None for GRU)."""

    h: Node
    c: Node | None = None


@dataclass
class LstmParams:
    U_i: Node
    W_i: Node
    b_i: Node
    U_f: Node
    W_f: Node
    b_f: Node
    U_o: Node
    W_o: Node
    b_o: Node
    U_c: Node
    W_c: Node
    b_c: Node


@dataclass
class GruParams:
    U_z: Node
    W_z: Node
    b_z: Node
    U_r: Node
    W_r: Node
    b_r: Node
    U_h: Node
    W_h: Node
    b_h: Node


def _uniform(rng: np.random.Generator, shape) -> Node:
    return Node(rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape))


def lstm_step(tape: Tape, p: LstmParams, x: Node, prev: CellState) -> CellState:
    """One LSTM step.

    i = sigmoid(x U_i + h W_i + b_i), f and o analogous,
    c~ = tanh(x U_c + h W_c + b_c), c' = f*c + i*c~, h' = o*tanh(c').
    """
    if prev.c is None:
        raise ShapeMismatch("lstm_step needs a cell state with memory c")
    i = ad.sigmoid(tape, ad.affine(tape, x, p.U_i, prev.h, p.W_i, p.b_i))
    f = ad.sigmoid(tape, ad.affine(tape, x, p.U_f, prev.h, p.W_f, p.b_f))
    o = ad.sigmoid(tape, ad.affine(tape, x, p.U_o, prev.h, p.W_o, p.b_o))
    c_tilde = ad.tanh(tape, ad.affine(tape, x, p.U_c, prev.h, p.W_c, p.b_c))
    c = ad.add(tape, ad.hadamard(tape, f, prev.c), ad.hadamard(tape, i, c_tilde))
    h = ad.hadamard(tape, o, ad.tanh(tape, c))
    return CellState(h=h, c=c)


def gru_step(tape: Tape, p: GruParams, x: Node, prev: CellState) -> CellState:
    """One GRU step.

    z = sigmoid(x U_z + h W_z + b_z), r analogous,
    h~ = tanh(x U_h + (r*h) W_h + b_h), h' = (1-z)*h + z*h~.
    """
    z = ad.sigmoid(tape, ad.affine(tape, x, p.U_z, prev.h, p.W_z, p.b_z))
    r = ad.sigmoid(tape, ad.affine(tape, x, p.U_r, prev.h, p.W_r, p.b_r))
    rh = ad.hadamard(tape, r, prev.h)
    h_tilde = ad.tanh(tape, ad.affine(tape, x, p.U_h, rh, p.W_h, p.b_h))
    h = ad.add(
        tape,
        ad.hadamard(tape, ad.one_minus(tape, z), prev.h),
        ad.hadamard(tape, z, h_tilde),
    )
    return CellState(h=h, c=None)


class LstmCell:
    kind = "lstm"

    def __init__(self, d_in: int, d_h: int, params: LstmParams):
        self.d_in = d_in
        self.d_h = d_h
        self.params = params

    @classmethod
    def create(cls, d_in: int, d_h: int, rng: np.random.Generator) -> "LstmCell":
        def gate(bias_value: float = 0.0):
            b = Node(np.full(d_h, bias_value))
            return _uniform(rng, (d_in, d_h)), _uniform(rng, (d_h, d_h)), b

        U_i, W_i, b_i = gate()
        U_f, W_f, b_f = gate(FORGET_BIAS)
        U_o, W_o, b_o = gate()
        U_c, W_c, b_c = gate()
        return cls(d_in, d_h, LstmParams(U_i, W_i, b_i, U_f, W_f, b_f, U_o, W_o, b_o, U_c, W_c, b_c))

    def step(self, tape: Tape, x: Node, state: CellState) -> CellState:
        return lstm_step(tape, self.params, x, state)

    def initial_state(self) -> CellState:
        return CellState(h=Node(np.zeros(self.d_h)), c=Node(np.zeros(self.d_h)))

    def named_params(self, prefix: str = "") -> list[tuple[str, Node]]:
        p = self.params
        names = [
            ("U_i", p.U_i), ("W_i", p.W_i), ("b_i", p.b_i),
            ("U_f", p.U_f), ("W_f", p.W_f), ("b_f", p.b_f),
            ("U_o", p.U_o), ("W_o", p.W_o), ("b_o", p.b_o),
            ("U_c", p.U_c), ("W_c", p.W_c), ("b_c", p.b_c),
        ]
        return [(prefix + n, node) for n, node in names]

    def param_count(self) -> int:
        return sum(node.value.size for _, node in self.named_params())


class GruCell:
    kind = "gru"

    def __init__(self, d_in: int, d_h: int, params: GruParams):
        self.d_in = d_in
        self.d_h = d_h
        self.params = params

    @classmethod
    def create(cls, d_in: int, d_h: int, rng: np.random.Generator) -> "GruCell":
        def gate():
            return _uniform(rng, (d_in, d_h)), _uniform(rng, (d_h, d_h)), Node(np.zeros(d_h))

        U_z, W_z, b_z = gate()
        U_r, W_r, b_r = gate()
        U_h, W_h, b_h = gate()
        return cls(d_in, d_h, GruParams(U_z, W_z, b_z, U_r, W_r, b_r, U_h, W_h, b_h))

    def step(self, tape: Tape, x: Node, state: CellState) -> CellState:
        return gru_step(tape, self.params, x, state)

    def initial_state(self) -> CellState:
        return CellState(h=Node(np.zeros(self.d_h)), c=None)

    def named_params(self, prefix: str = "") -> list[tuple[str, Node]]:
        p = self.params
        names = [
            ("U_z", p.U_z), ("W_z", p.W_z), ("b_z", p.b_z),
            ("U_r", p.U_r), ("W_r", p.W_r), ("b_r", p.b_r),
            ("U_h", p.U_h), ("W_h", p.W_h), ("b_h", p.b_h),
        ]
        return [(prefix + n, node) for n, node in names]

    def param_count(self) -> int:
        return sum(node.value.size for _, node in self.named_params())


CELL_KINDS = ("lstm", "gru")


def make_cell(kind: str, d_in: int, d_h: int, rng: np.random.Generator):
    if kind == "lstm":
        return LstmCell.create(d_in, d_h, rng)
    if kind == "gru":
        return GruCell.create(d_in, d_h, rng)
    raise ValueError(f"unknown cell kind {kind!r}; expected one of {CELL_KINDS}")


def unroll(tape: Tape, cell, inputs: list[Node], init: CellState | None = None) -> list[CellState]:
    """Run the cell over a sequence, returning one state per input."""
    if not inputs:
        raise EmptySequence("unroll needs at least one input")
    state = cell.initial_state() if init is None else init
    states = []
    for x in inputs:
        state = cell.step(tape, x, state)
        states.append(state)
    return states
