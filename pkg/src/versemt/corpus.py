"""Corpus ingestion for verse-aligned bilingual text.

Two ingest formats are supported:

* ``pipe_delimited`` -- one verse per line as ``chapter|verse|text``
  (the layout used by common Quranic text distributions), and
* ``line_aligned`` -- two plain files with one pre-split sentence per
  line, aligned by line number.

Parsing NFC-normalizes the text. The invocation-opening formula that many
chapters carry merged into their first verse can be split out and
replicated on the translation side so both sides keep equal per-chapter
record counts; see :func:`normalize_basmala`.
"""

from __future__ import annotations

import io
import math
import unicodedata
from collections import Counter, OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentMismatch,
    EmptyCorpus,
    InvalidEncoding,
    MalformedLine,
)

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
RESERVED_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)

# Opening formula prefixed to chapters; kept in NFC.
BASMALA = unicodedata.normalize("NFC", "بِسْمِ اللَّهِ الرَّحْمَنِ الرَّحِيمِ")

# Arabic combining marks (fathatan..wavy hamza range plus superscript alef).
_DIACRITIC_RANGES = ((0x064B, 0x065F), (0x0670, 0x0670))


def _is_diacritic(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _DIACRITIC_RANGES)


def _is_punct(ch: str) -> bool:
    # All P* categories, plus a few marks spelled out for clarity even
    # though Unicode already classifies them as punctuation.
    return unicodedata.category(ch).startswith("P") or ch in "،؛؟።፡፣፤፥፦፧"


@dataclass(frozen=True)
class VerseRecord:
    chapter: int
    verse: int
    text: str

    def __post_init__(self):
        if self.chapter < 1 or self.verse < 1:
            raise ValueError(f"chapter/verse must be >= 1, got {self.chapter}:{self.verse}")
        if not self.text.strip():
            raise ValueError("verse text is empty")


@dataclass(frozen=True)
class SentencePair:
    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    origin: tuple[int, int, int]  # (chapter, verse, index within verse)


class Vocabulary:
    """Token <-> dense id bijection with fixed reserved ids 0..3."""

    def __init__(self, content_tokens=(), content_counts=None):
        tokens = list(content_tokens)
        for t in tokens:
            if t in RESERVED_TOKENS:
                raise ValueError(f"reserved token {t!r} cannot be a content token")
        counts = list(content_counts) if content_counts is not None else [0] * len(tokens)
        if len(counts) != len(tokens):
            raise ValueError("content token/count lists differ in length")
        self.token_of: list[str] = list(RESERVED_TOKENS) + tokens
        self.counts: list[int] = [0, 0, 0, 0] + counts
        self.id_of: dict[str, int] = {t: i for i, t in enumerate(self.token_of)}

    def __len__(self) -> int:
        return len(self.token_of)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def encode(self, tokens) -> list[int]:
        """Map tokens to ids, falling back to the unknown id."""
        return [self.id_of.get(t, UNK_ID) for t in tokens]

    def decode(self, ids, keep_unk: bool = True) -> list[str]:
        """Map ids back to tokens, dropping pad/bos/eos."""
        out = []
        for i in ids:
            if i in (PAD_ID, BOS_ID, EOS_ID):
                continue
            if i == UNK_ID and not keep_unk:
                continue
            out.append(self.token_of[i])
        return out

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for i, (tok, cnt) in enumerate(zip(self.token_of, self.counts)):
                f.write(f"{i}\t{tok}\t{cnt}\n")

    @classmethod
    def load_tsv(cls, path) -> "Vocabulary":
        tokens, counts = [], []
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise MalformedLine(line_no + 1, "expected id<TAB>token<TAB>count")
                ident, tok, cnt = parts
                if int(ident) != line_no:
                    raise MalformedLine(line_no + 1, f"non-dense id {ident}")
                tokens.append(tok)
                counts.append(int(cnt))
        if tokens[:4] != list(RESERVED_TOKENS):
            raise MalformedLine(1, "reserved token rows missing or reordered")
        return cls(tokens[4:], counts[4:])


@dataclass
class ParallelCorpus:
    pairs: list[SentencePair]
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    split_seed: int = 0


def _iter_lines(raw):
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(str(exc)) from None
    if isinstance(raw, str):
        return io.StringIO(raw)
    return raw


def parse_tanzil(raw, fmt: str = "pipe_delimited") -> list[VerseRecord]:
    """Parse verse records from text.

    ``pipe_delimited`` lines look like ``2|282|<text>``; ``line_aligned``
    treats every non-empty line as its own record under chapter 1,
    numbered by original line position so misalignments stay detectable.
    """
    if fmt not in ("pipe_delimited", "line_aligned"):
        raise ValueError(f"unknown format {fmt!r}")
    records: list[VerseRecord] = []
    for line_no, line in enumerate(_iter_lines(raw), start=1):
        text = line.rstrip("\n").rstrip("\r")
        if not text.strip():
            continue
        if fmt == "pipe_delimited":
            parts = text.split("|", 2)
            if len(parts) != 3:
                raise MalformedLine(line_no, f"expected chapter|verse|text, got {len(parts)} field(s)")
            ch_s, v_s, body = parts
            try:
                chapter, verse = int(ch_s), int(v_s)
            except ValueError:
                raise MalformedLine(line_no, f"non-numeric chapter/verse {ch_s!r}|{v_s!r}") from None
            if chapter < 1 or verse < 1:
                raise MalformedLine(line_no, f"chapter/verse must be >= 1, got {chapter}:{verse}")
            body = body.strip()
            if not body:
                raise MalformedLine(line_no, "empty verse text")
            records.append(VerseRecord(chapter, verse, unicodedata.normalize("NFC", body)))
        else:
            records.append(VerseRecord(1, line_no, unicodedata.normalize("NFC", text.strip())))
    return records


def _skeleton(text: str) -> str:
    """Text with diacritics and spaces removed, for loose prefix matching."""
    return "".join(ch for ch in text if not _is_diacritic(ch) and not ch.isspace())


_BASMALA_SKELETON = _skeleton(BASMALA)
_BASMALA_WORDS = len(BASMALA.split())


def _split_leading_basmala(text: str) -> tuple[str, str] | None:
    """If text starts with the basmala plus more, return (basmala, rest)."""
    words = text.split()
    if len(words) <= _BASMALA_WORDS:
        return None
    head = " ".join(words[:_BASMALA_WORDS])
    if _skeleton(head) != _BASMALA_SKELETON:
        return None
    return head, " ".join(words[_BASMALA_WORDS:])


def _group_by_chapter(records: list[VerseRecord]) -> "OrderedDict[int, list[VerseRecord]]":
    groups: OrderedDict[int, list[VerseRecord]] = OrderedDict()
    for r in records:
        groups.setdefault(r.chapter, []).append(r)
    return groups


def normalize_basmala(
    source_verses: list[VerseRecord], target_verses: list[VerseRecord]
) -> tuple[list[VerseRecord], list[VerseRecord]]:
    """Balance per-chapter record counts around the chapter-opening formula.

    On the target side, a first verse that begins with the basmala merged
    into more text is split into a standalone record plus the remainder
    (both keep the original verse number, so they pair up positionally).
    On the source side, the translated basmala -- the first record of
    chapter 1 -- is replicated before the first verse of every chapter
    whose target side was split. Raises AlignmentMismatch if any chapter
    ends up with unequal counts.
    """
    src_groups = _group_by_chapter(source_verses)
    tgt_groups = _group_by_chapter(target_verses)

    split_chapters: set[int] = set()
    new_target: list[VerseRecord] = []
    for chapter, recs in tgt_groups.items():
        first = recs[0]
        split = _split_leading_basmala(first.text)
        if split is not None:
            head, rest = split
            new_target.append(VerseRecord(chapter, first.verse, head))
            new_target.append(VerseRecord(chapter, first.verse, rest))
            new_target.extend(recs[1:])
            split_chapters.add(chapter)
        else:
            new_target.extend(recs)

    source_basmala = None
    if 1 in src_groups and src_groups[1]:
        source_basmala = src_groups[1][0].text

    new_source: list[VerseRecord] = []
    for chapter, recs in src_groups.items():
        if chapter in split_chapters:
            if source_basmala is None:
                raise AlignmentMismatch(chapter, detail="no chapter-1 basmala to replicate")
            new_source.append(VerseRecord(chapter, recs[0].verse, source_basmala))
        new_source.extend(recs)

    src_counts = Counter(r.chapter for r in new_source)
    tgt_counts = Counter(r.chapter for r in new_target)
    for chapter in sorted(set(src_counts) | set(tgt_counts)):
        if src_counts[chapter] != tgt_counts[chapter]:
            raise AlignmentMismatch(
                chapter,
                detail=f"{src_counts[chapter]} source vs {tgt_counts[chapter]} target records",
            )
    return new_source, new_target


def strip_punctuation_and_tokenize(text: str, keep_diacritics: bool = True) -> list[str]:
    """Remove punctuation and split on whitespace runs.

    Punctuation codepoints become spaces (so word separators written as
    punctuation cannot fuse neighbouring words); combining diacritics are
    deleted in place when ``keep_diacritics`` is false.
    """
    chars = []
    for ch in text:
        if _is_punct(ch):
            chars.append(" ")
        elif not keep_diacritics and _is_diacritic(ch):
            continue
        else:
            chars.append(ch)
    return "".join(chars).split()


def align_pairs(
    source: list[VerseRecord],
    target: list[VerseRecord],
    keep_diacritics: bool = True,
) -> list[SentencePair]:
    """Pair source and target sentence records verse by verse.

    Records sharing a (chapter, verse) key are zipped in order; unequal
    group sizes (or keys present on one side only) raise AlignmentMismatch.
    Pairs where either side tokenizes to nothing are dropped.
    """
    def group(records):
        groups: OrderedDict[tuple[int, int], list[VerseRecord]] = OrderedDict()
        for r in records:
            groups.setdefault((r.chapter, r.verse), []).append(r)
        return groups

    src_groups = group(source)
    tgt_groups = group(target)
    for (ch, v) in sorted(src_groups.keys() | tgt_groups.keys()):
        n_src = len(src_groups.get((ch, v), ()))
        n_tgt = len(tgt_groups.get((ch, v), ()))
        if n_src != n_tgt:
            raise AlignmentMismatch(ch, v, detail=f"{n_src} source vs {n_tgt} target sentences")

    pairs: list[SentencePair] = []
    for key, src_recs in src_groups.items():
        tgt_recs = tgt_groups[key]
        for idx, (s, t) in enumerate(zip(src_recs, tgt_recs)):
            s_toks = strip_punctuation_and_tokenize(s.text, keep_diacritics)
            t_toks = strip_punctuation_and_tokenize(t.text, keep_diacritics)
            if not s_toks or not t_toks:
                continue
            pairs.append(SentencePair(tuple(s_toks), tuple(t_toks), (key[0], key[1], idx)))
    return pairs


def split_corpus(pairs: list[SentencePair], train_fraction: float, seed: int):
    """Deterministic seeded shuffle, then a round-half-up 80/20-style cut."""
    if not pairs:
        raise EmptyCorpus("cannot split an empty pair list")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_train = math.floor(train_fraction * len(pairs) + 0.5)
    shuffled = [pairs[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def build_vocab(pairs: list[SentencePair], side: str, min_count: int = 1) -> Vocabulary:
    """Frequency-then-lexicographic vocabulary over one side of the pairs."""
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counter: Counter[str] = Counter()
    for p in pairs:
        toks = p.source_tokens if side == "source" else p.target_tokens
        counter.update(t for t in toks if t not in RESERVED_TOKENS)
    kept = sorted(
        (t for t, c in counter.items() if c >= min_count),
        key=lambda t: (-counter[t], t),
    )
    return Vocabulary(kept, [counter[t] for t in kept])


def write_pair_files(pairs: list[SentencePair], src_path, tgt_path) -> None:
    with open(src_path, "w", encoding="utf-8", newline="\n") as fs, open(
        tgt_path, "w", encoding="utf-8", newline="\n"
    ) as ft:
        for p in pairs:
            fs.write(" ".join(p.source_tokens) + "\n")
            ft.write(" ".join(p.target_tokens) + "\n")


def read_pair_files(src_path, tgt_path) -> list[SentencePair]:
    """Read back already-tokenized, line-aligned pair files."""
    with open(src_path, encoding="utf-8") as f:
        src_lines = [l.rstrip("\n") for l in f]
    with open(tgt_path, encoding="utf-8") as f:
        tgt_lines = [l.rstrip("\n") for l in f]
    if len(src_lines) != len(tgt_lines):
        raise AlignmentMismatch(
            1, detail=f"{len(src_lines)} source vs {len(tgt_lines)} target lines"
        )
    pairs = []
    for i, (s, t) in enumerate(zip(src_lines, tgt_lines), start=1):
        s_toks, t_toks = tuple(s.split()), tuple(t.split())
        if not s_toks or not t_toks:
            continue
        pairs.append(SentencePair(s_toks, t_toks, (1, i, 0)))
    return pairs
