"""Corpus-level BLEU and perplexity scoring.

BLEU is the brevity penalty times the weighted geometric mean of clipped
(modified) n-gram precisions, accumulated corpus-wide. Candidates are
scored against a single reference each; token sequences are compared as
given, so callers pick the tokenization.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyInput, LengthMismatch, PositiveLogProb

SMOOTH_EPS = 1e-9


@dataclass
class BleuConfig:
    max_n: int = 4
    smoothing: str = "epsilon"  # or "none"

    def __post_init__(self):
        if self.max_n < 1:
            raise ValueError(f"max_n must be >= 1, got {self.max_n}")
        if self.smoothing not in ("none", "epsilon"):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")

    @property
    def weights(self) -> list[float]:
        return [1.0 / self.max_n] * self.max_n


@dataclass
class BleuReport:
    bleu: float
    per_n_precision: list[float]
    brevity_penalty: float
    candidate_len: int
    reference_len: int


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_counts(candidates, references, n: int) -> tuple[int, int]:
    """(clipped matches, total candidate n-grams), summed corpus-wide."""
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    matched = 0
    total = 0
    for cand, ref in zip(candidates, references):
        c_counts = _ngrams(cand, n)
        r_counts = _ngrams(ref, n)
        matched += sum(min(c, r_counts[g]) for g, c in c_counts.items())
        total += sum(c_counts.values())
    return matched, total


def ngram_precision(candidates, references, n: int) -> Fraction:
    """Modified (clipped) n-gram precision as an exact rational."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    matched, total = _clipped_counts(candidates, references, n)
    if total == 0:
        return Fraction(0)
    return Fraction(matched, total)


def brevity_penalty(candidate_len: int, reference_len: int) -> float:
    if candidate_len < 0 or reference_len < 0:
        raise ValueError("lengths must be non-negative")
    if candidate_len >= reference_len:
        return 1.0
    if candidate_len == 0:
        return 0.0
    return math.exp(1.0 - reference_len / candidate_len)


def corpus_bleu(candidates, references, config: BleuConfig | None = None) -> BleuReport:
    config = config or BleuConfig()
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyInput("corpus_bleu needs at least one sentence pair")

    raw: list[float] = []
    smoothed: list[float] = []
    for n in range(1, config.max_n + 1):
        matched, total = _clipped_counts(candidates, references, n)
        p = matched / total if total else 0.0
        raw.append(p)
        if matched == 0 and config.smoothing == "epsilon" and total:
            smoothed.append(SMOOTH_EPS / total)
        else:
            smoothed.append(p)

    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    bp = brevity_penalty(cand_len, ref_len)
    if any(p == 0.0 for p in smoothed):
        bleu = 0.0
    else:
        bleu = bp * math.exp(sum(w * math.log(p) for w, p in zip(config.weights, smoothed)))
    return BleuReport(
        bleu=bleu,
        per_n_precision=raw,
        brevity_penalty=bp,
        candidate_len=cand_len,
        reference_len=ref_len,
    )


def perplexity(token_log_probs) -> float:
    """exp(-mean log prob) of per-token natural-log probabilities."""
    logs = list(token_log_probs)
    if not logs:
        raise EmptyInput("perplexity needs at least one token log-probability")
    if any(lp > 0 for lp in logs):
        raise PositiveLogProb("log-probabilities must be <= 0")
    return math.exp(-sum(logs) / len(logs))


def compare_systems(
    system_outputs: dict[str, list], references, config: BleuConfig | None = None
) -> list[tuple[str, BleuReport]]:
    """One BleuReport per system, sorted by descending BLEU (name breaks ties)."""
    rows = []
    for name in system_outputs:
        cands = system_outputs[name]
        if len(cands) != len(references):
            raise LengthMismatch(
                f"system {name!r}: {len(cands)} candidates vs {len(references)} references"
            )
        rows.append((name, corpus_bleu(cands, references, config)))
    rows.sort(key=lambda item: (-item[1].bleu, item[0]))
    return rows


REPORT_COLUMNS = ("system", "bleu", "p1", "p2", "p3", "p4", "BP", "cand_len", "ref_len")


def format_report_tsv(rows: list[tuple[str, BleuReport]], max_n: int = 4) -> str:
    """Report TSV: system, bleu, p1..pN, BP, candidate/reference lengths."""
    header = ["system", "bleu"] + [f"p{n}" for n in range(1, max_n + 1)]
    header += ["BP", "cand_len", "ref_len"]
    lines = ["\t".join(header)]
    for name, rep in rows:
        cells = [name, f"{rep.bleu:.6f}"]
        cells += [f"{p:.6f}" for p in rep.per_n_precision]
        cells += [f"{rep.brevity_penalty:.6f}", str(rep.candidate_len), str(rep.reference_len)]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def format_comparison_csv(rows: list[tuple[str, BleuReport]]) -> str:
    """Bar-plot data: one (system, bleu) row per system."""
    lines = ["system,bleu"]
    for name, rep in rows:
        lines.append(f"{name},{rep.bleu:.6f}")
    return "\n".join(lines) + "\n"


def format_comparison_table(rows: list[tuple[str, BleuReport]]) -> str:
    """Human-facing comparison: BLEU as percentages, best system first."""
    lines = ["system\tbleu\tbleu_pct"]
    for name, rep in rows:
        lines.append(f"{name}\t{rep.bleu:.6f}\t{100.0 * rep.bleu:.2f}%")
    return "\n".join(lines) + "\n"
