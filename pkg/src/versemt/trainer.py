"""Mini-batch teacher-forced training with Adam.

The loop is deliberately plain: epoch-seeded shuffling into padded
batches, one tape per batch, summed sequence losses normalized per
token, optional global-norm gradient clipping, then an Adam update.
Validation reports teacher-forced accuracy/perplexity plus greedy-decode
prediction score, prediction perplexity and BLEU after every epoch.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .corpus import BOS_ID, EOS_ID, PAD_ID, SentencePair, Vocabulary
from .errors import EmptyCorpus, EmptyValidationSet, ShapeMismatch
from .evaluation import BleuConfig, corpus_bleu
from .seq2seq import Seq2SeqModel, decode_step, greedy_decode, sequence_loss, _encode_states

METRICS_COLUMNS = ("epoch", "bleu", "val_ppl", "val_acc", "avg_pred_score", "pred_ppl")


@dataclass
class TrainConfig:
    cell_type: str = "lstm"
    d: int = 128
    d_h: int = 128
    max_seq_len: int = 44
    train_batch: int = 80
    valid_batch: int = 40
    lr: float = 0.001
    epochs: int = 10
    checkpoint_every: int = 10000
    seed: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float | None = 5.0
    attention: str = "general"
    # Stop once the epoch's train loss (nats/token) drops below this; 0 disables.
    early_stop_loss: float = 0.0

    def __post_init__(self):
        if self.cell_type not in ("lstm", "gru"):
            raise ValueError(f"cell_type must be lstm or gru, got {self.cell_type!r}")
        if self.attention not in ("general", "dot"):
            raise ValueError(f"attention must be general or dot, got {self.attention!r}")
        for name in ("d", "d_h", "max_seq_len", "train_batch", "valid_batch", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0 or self.adam_eps <= 0:
            raise ValueError("lr and adam_eps must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")
        if self.early_stop_loss < 0:
            raise ValueError("early_stop_loss must be >= 0")


class AdamState:
    """First/second moment accumulators mirroring the parameter shapes."""

    def __init__(self, named_params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(node.value) for name, node in named_params}
        self.v = {name: np.zeros_like(node.value) for name, node in named_params}


def adam_update(named_params, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam step over Nodes carrying their own grads."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, node in named_params:
        g = node.grad
        m = state.m[name]
        v = state.v[name]
        if m.shape != g.shape:
            raise ShapeMismatch(f"adam state {name}: {m.shape} vs grad {g.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** state.t)
        v_hat = v / (1 - b2 ** state.t)
        node.value -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def clip_gradients(named_params, max_norm: float) -> float:
    """Scale all grads so their global L2 norm is at most max_norm."""
    total = 0.0
    for _, node in named_params:
        total += float(np.sum(node.grad * node.grad))
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for _, node in named_params:
            node.grad *= factor
    return norm


def filter_by_length(pairs: list[SentencePair], max_seq_len: int) -> list[SentencePair]:
    """Drop pairs longer than max_seq_len on either side (pre BOS/EOS counts)."""
    if max_seq_len < 1:
        raise ValueError(f"max_seq_len must be >= 1, got {max_seq_len}")
    return [
        p
        for p in pairs
        if len(p.source_tokens) <= max_seq_len and len(p.target_tokens) <= max_seq_len
    ]


def encode_pairs(pairs, src_vocab: Vocabulary, tgt_vocab: Vocabulary):
    """Token pairs -> (source ids, target ids + EOS)."""
    out = []
    for p in pairs:
        out.append(
            (src_vocab.encode(p.source_tokens), tgt_vocab.encode(p.target_tokens) + [EOS_ID])
        )
    return out


@dataclass
class Batch:
    src: np.ndarray  # (B, max source len), PAD-padded int64
    tgt: np.ndarray  # (B, max target len)

    def pairs(self):
        """Recover the ragged id sequences; PAD positions carry no content."""
        out = []
        for i in range(self.src.shape[0]):
            s = self.src[i][self.src[i] != PAD_ID]
            t = self.tgt[i][self.tgt[i] != PAD_ID]
            out.append((s.tolist(), t.tolist()))
        return out


def _pad(seqs) -> np.ndarray:
    width = max(len(s) for s in seqs)
    arr = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        arr[i, : len(s)] = s
    return arr


def make_batches(id_pairs, batch_size: int, seed: int, epoch: int) -> list[Batch]:
    """Epoch-seeded shuffle, then fixed-size padded chunks."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not id_pairs:
        raise EmptyCorpus("cannot batch an empty corpus")
    order = np.random.default_rng([seed, epoch]).permutation(len(id_pairs))
    shuffled = [id_pairs[i] for i in order]
    batches = []
    for start in range(0, len(shuffled), batch_size):
        chunk = shuffled[start : start + batch_size]
        batches.append(Batch(src=_pad([s for s, _ in chunk]), tgt=_pad([t for _, t in chunk])))
    return batches


def train_step(model: Seq2SeqModel, batch: Batch, adam: AdamState, config: TrainConfig) -> float:
    """One optimizer update on a batch; returns the per-token loss in nats."""
    tape = Tape()
    model.zero_grad()
    total: Node | None = None
    n_tokens = 0
    for src, tgt in batch.pairs():
        loss, count = sequence_loss(tape, model, src, tgt)
        total = loss if total is None else ad.add(tape, total, loss)
        n_tokens += count
    mean = ad.scale(tape, total, 1.0 / n_tokens)
    tape.backward(mean)
    if config.clip_norm is not None:
        clip_gradients(model.named_params(), config.clip_norm)
    adam_update(model.named_params(), adam, config.lr)
    return float(mean.value)


@dataclass
class EpochMetrics:
    epoch: int
    bleu: float
    val_ppl: float
    val_acc: float
    avg_pred_score: float
    pred_ppl: float

    def tsv_row(self) -> str:
        return "\t".join(
            [
                str(self.epoch),
                f"{self.bleu:.4f}",
                f"{self.val_ppl:.4f}",
                f"{self.val_acc:.2f}",
                f"{self.avg_pred_score:.4f}",
                f"{self.pred_ppl:.4f}",
            ]
        )


def validate(model: Seq2SeqModel, valid_id_pairs, epoch: int = 0, max_decode_len: int = 44) -> EpochMetrics:
    """Teacher-forced accuracy/perplexity plus greedy-decode metrics.

    val_acc counts positions where argmax(p_t) equals the gold token;
    val_ppl is exp(mean token cross-entropy); avg_pred_score is the mean
    natural-log probability of the greedy tokens and pred_ppl its
    exponentiated negation. BLEU compares greedy output (EOS stripped)
    against the gold ids.
    """
    if not valid_id_pairs:
        raise EmptyValidationSet("validation set is empty")
    total_loss = 0.0
    total_tokens = 0
    correct = 0
    pred_log_probs: list[float] = []
    candidates = []
    references = []
    for src, tgt in valid_id_pairs:
        tape = Tape()
        e, state = _encode_states(tape, model, src)
        prev = BOS_ID
        for gold in tgt:
            state, p, _ = decode_step(tape, model, state, prev, e)
            total_loss += -math.log(p.value[gold] + 1e-12)
            correct += int(np.argmax(p.value) == gold)
            total_tokens += 1
            prev = gold
        decoded = greedy_decode(model, src, max_len=max_decode_len)
        for tok, probs in zip(decoded.token_ids, decoded.per_step_probs):
            pred_log_probs.append(math.log(probs[tok]))
        candidates.append([t for t in decoded.token_ids if t != EOS_ID])
        references.append([t for t in tgt if t != EOS_ID])
    avg_pred_score = sum(pred_log_probs) / len(pred_log_probs)
    bleu = corpus_bleu(candidates, references, BleuConfig(smoothing="epsilon")).bleu
    return EpochMetrics(
        epoch=epoch,
        bleu=bleu,
        val_ppl=math.exp(total_loss / total_tokens),
        val_acc=100.0 * correct / total_tokens,
        avg_pred_score=avg_pred_score,
        pred_ppl=math.exp(-avg_pred_score),
    )


def _append_metrics(path, metrics: EpochMetrics) -> None:
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        if new_file:
            f.write("\t".join(METRICS_COLUMNS) + "\n")
        f.write(metrics.tsv_row() + "\n")


def train(
    config: TrainConfig,
    train_pairs: list[SentencePair],
    valid_pairs: list[SentencePair],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    out_dir=None,
):
    """Run the full training protocol; returns (final checkpoint, metrics).

    Checkpoints are written whenever the running sample count crosses a
    ``checkpoint_every`` boundary, at every epoch end, and once more at
    the end of training (so an epochs=0 run still leaves the initial
    model on disk). All randomness flows from config.seed.
    """
    from .checkpoint import Checkpoint, save_checkpoint  # deferred: checkpoint imports this module

    train_kept = filter_by_length(train_pairs, config.max_seq_len)
    valid_kept = filter_by_length(valid_pairs, config.max_seq_len)
    if not train_kept:
        raise EmptyCorpus("no training pairs survive length filtering")
    if not valid_kept:
        raise EmptyValidationSet("no validation pairs survive length filtering")

    train_ids = encode_pairs(train_kept, src_vocab, tgt_vocab)
    valid_ids = encode_pairs(valid_kept, src_vocab, tgt_vocab)

    rng = np.random.default_rng(config.seed)
    model = Seq2SeqModel(
        config.cell_type,
        len(src_vocab),
        len(tgt_vocab),
        config.d,
        config.d_h,
        rng,
        attention=config.attention,
    )
    adam = AdamState(model.named_params(), config.beta1, config.beta2, config.adam_eps)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.tsv") if out_dir is not None else None

    ckpt = Checkpoint(
        config=config,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        model=model,
        adam=adam,
        samples_seen=0,
        metrics=[],
    )

    def save_as(filename: str):
        if out_dir is not None:
            save_checkpoint(ckpt, os.path.join(out_dir, filename))

    history: list[EpochMetrics] = []
    samples_seen = 0
    for epoch in range(1, config.epochs + 1):
        batches = make_batches(train_ids, config.train_batch, config.seed, epoch)
        epoch_loss = 0.0
        epoch_tokens = 0
        for batch in batches:
            loss = train_step(model, batch, adam, config)
            batch_tokens = sum(len(t) for _, t in batch.pairs())
            epoch_loss += loss * batch_tokens
            epoch_tokens += batch_tokens
            before = samples_seen
            samples_seen += batch.src.shape[0]
            ckpt.samples_seen = samples_seen
            if before // config.checkpoint_every != samples_seen // config.checkpoint_every:
                save_as(f"checkpoint-{samples_seen:08d}.anmt")
        metrics = validate(model, valid_ids, epoch=epoch, max_decode_len=config.max_seq_len)
        history.append(metrics)
        ckpt.metrics = history
        if metrics_path is not None:
            _append_metrics(metrics_path, metrics)
        save_as(f"checkpoint-epoch-{epoch:03d}.anmt")
        if config.early_stop_loss > 0 and epoch_loss / epoch_tokens < config.early_stop_loss:
            break

    save_as("checkpoint-final.anmt")
    return ckpt, history
