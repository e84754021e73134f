"""Attention-based encoder-decoder model.

The encoder consumes source embeddings one token at a time; its hidden
states e_0..e_{S-1} form the attention memory. Each decoder step scores
the memory against the previous decoder state, mixes a context vector
from the softmax weights, feeds [previous target embedding, context] to
the decoder cell and projects the new hidden state to vocabulary scores.
Decoding is greedy argmax with deterministic lowest-id tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .cells import CellState, make_cell
from .corpus import BOS_ID, EOS_ID, PAD_ID
from .errors import (
    EmptySequence,
    EmptySource,
    EmptyTarget,
    IdOutOfRange,
    ShapeMismatch,
)

ATTENTION_MODES = ("general", "dot")


class EmbeddingTable:
    """Token id -> dense vector lookup; the pad id always maps to zeros."""

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator):
        self.vocab_size = vocab_size
        self.dim = dim
        self.table = Node(rng.uniform(-0.1, 0.1, size=(vocab_size, dim)))
        self.table.value[PAD_ID] = 0.0

    def lookup(self, tape: Tape, token_id: int) -> Node:
        if not 0 <= token_id < self.vocab_size:
            raise IdOutOfRange(f"token id {token_id} outside [0, {self.vocab_size})")
        if token_id == PAD_ID:
            return Node(np.zeros(self.dim))
        return ad.pick_row(tape, self.table, token_id)


class AttentionParams:
    """Bilinear ("general") score h' @ W @ e, or plain dot product."""

    def __init__(self, d_h: int, rng: np.random.Generator | None = None, mode: str = "general"):
        if mode not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {mode!r}")
        self.mode = mode
        self.d_h = d_h
        if mode == "general":
            if rng is None:
                raise ValueError("general attention needs an rng for score_W init")
            self.score_W = Node(rng.uniform(-0.1, 0.1, size=(d_h, d_h)))
        else:
            self.score_W = None


@dataclass
class DecodeResult:
    token_ids: list[int]
    per_step_probs: list[np.ndarray] = field(default_factory=list)
    attention_maps: list[np.ndarray] = field(default_factory=list)


class Seq2SeqModel:
    def __init__(
        self,
        cell_type: str,
        src_vocab_size: int,
        tgt_vocab_size: int,
        d: int,
        d_h: int,
        rng: np.random.Generator,
        attention: str = "general",
    ):
        self.cell_type = cell_type
        self.d = d
        self.d_h = d_h
        self.src_vocab_size = src_vocab_size
        self.tgt_vocab_size = tgt_vocab_size
        self.attention_mode = attention
        self.src_embed = EmbeddingTable(src_vocab_size, d, rng)
        self.tgt_embed = EmbeddingTable(tgt_vocab_size, d, rng)
        self.encoder = make_cell(cell_type, d, d_h, rng)
        # Decoder consumes [target embedding, attention context].
        self.decoder = make_cell(cell_type, d + d_h, d_h, rng)
        self.attn = AttentionParams(d_h, rng, attention)
        self.out_W = Node(rng.uniform(-0.1, 0.1, size=(d_h, tgt_vocab_size)))
        self.out_b = Node(np.zeros(tgt_vocab_size))

    def named_params(self) -> list[tuple[str, Node]]:
        named = [
            ("src_embed.table", self.src_embed.table),
            ("tgt_embed.table", self.tgt_embed.table),
        ]
        named += self.encoder.named_params("encoder.")
        named += self.decoder.named_params("decoder.")
        if self.attn.score_W is not None:
            named.append(("attn.score_W", self.attn.score_W))
        named += [("out_W", self.out_W), ("out_b", self.out_b)]
        return named

    def zero_grad(self) -> None:
        for _, node in self.named_params():
            node.zero_grad()

    def param_count(self) -> int:
        return sum(node.value.size for _, node in self.named_params())


def _encode_states(tape: Tape, model: Seq2SeqModel, src_ids) -> tuple[list[Node], CellState]:
    if len(src_ids) == 0:
        raise EmptySource("cannot encode an empty source sequence")
    state = model.encoder.initial_state()
    e: list[Node] = []
    for tid in src_ids:
        x = model.src_embed.lookup(tape, int(tid))
        state = model.encoder.step(tape, x, state)
        e.append(state.h)
    return e, state


def encode(tape: Tape, model: Seq2SeqModel, src_ids) -> list[Node]:
    """Encoder hidden states, one per source token."""
    e, _ = _encode_states(tape, model, src_ids)
    return e


def attend(tape: Tape, attn: AttentionParams, h_prev: Node, e: list[Node]) -> tuple[Node, Node]:
    """Softmax-weighted average of encoder states, scored against h_prev."""
    if not e:
        raise EmptySequence("attention needs at least one encoder state")
    if h_prev.value.shape != (attn.d_h,):
        raise ShapeMismatch(f"query shape {h_prev.value.shape} != ({attn.d_h},)")
    memory = ad.stack_rows(tape, e)
    query = h_prev if attn.score_W is None else ad.vecmat(tape, h_prev, attn.score_W)
    scores = ad.matvec(tape, memory, query)
    weights = ad.softmax(tape, scores)
    context = ad.vecmat(tape, weights, memory)
    return context, weights


def decode_step(
    tape: Tape,
    model: Seq2SeqModel,
    state: CellState,
    prev_token_id: int,
    e: list[Node],
) -> tuple[CellState, Node, Node]:
    """One decoder step; returns (new state, token probabilities, attention)."""
    w_prev = model.tgt_embed.lookup(tape, int(prev_token_id))
    context, weights = attend(tape, model.attn, state.h, e)
    x = ad.concat(tape, w_prev, context)
    new_state = model.decoder.step(tape, x, state)
    scores = ad.linear(tape, new_state.h, model.out_W, model.out_b)
    p = ad.softmax(tape, scores)
    return new_state, p, weights


def greedy_decode(model: Seq2SeqModel, src_ids, max_len: int = 44) -> DecodeResult:
    """Argmax decoding from BOS until EOS or the length cap."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    tape = Tape()  # recorded then discarded; no backward pass
    e, state = _encode_states(tape, model, src_ids)
    result = DecodeResult(token_ids=[])
    prev = BOS_ID
    for _ in range(max_len):
        state, p, weights = decode_step(tape, model, state, prev, e)
        token = int(np.argmax(p.value))  # ties resolve to the lowest id
        result.token_ids.append(token)
        result.per_step_probs.append(p.value.copy())
        result.attention_maps.append(weights.value.copy())
        if token == EOS_ID:
            break
        prev = token
    return result


def sequence_loss(tape: Tape, model: Seq2SeqModel, src_ids, tgt_ids) -> tuple[Node, int]:
    """Teacher-forced cross-entropy over the gold target sequence.

    The decoder input at step t is the gold token t-1 (BOS at t=0); the
    returned scalar is the summed negative log-probability over all
    ``len(tgt_ids)`` steps. Callers include EOS in ``tgt_ids`` when they
    want the end of sequence predicted.
    """
    if len(tgt_ids) == 0:
        raise EmptyTarget("cannot score an empty target sequence")
    e, state = _encode_states(tape, model, src_ids)
    total: Node | None = None
    prev = BOS_ID
    for gold in tgt_ids:
        gold = int(gold)
        if not 0 <= gold < model.tgt_vocab_size:
            raise IdOutOfRange(f"target id {gold} outside [0, {model.tgt_vocab_size})")
        state, p, _ = decode_step(tape, model, state, prev, e)
        step_loss = ad.neg_log_pick(tape, p, gold)
        total = step_loss if total is None else ad.add(tape, total, step_loss)
        prev = gold
    return total, len(tgt_ids)
