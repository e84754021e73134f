"""Command-line interface: corpus building, training, translation, scoring."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import corpus as cp
from . import evaluation as ev
from .checkpoint import load_checkpoint
from .errors import VersemtError
from .seq2seq import greedy_decode
from .trainer import TrainConfig, train

log = logging.getLogger("versemt")


def _read_tokenized_lines(path, keep_diacritics: bool) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [cp.strip_punctuation_and_tokenize(line.rstrip("\n"), keep_diacritics) for line in f]


def cmd_corpus(args) -> int:
    if args.format == "tanzil":
        with open(args.source, "rb") as f:
            src_records = cp.parse_tanzil(f.read(), "pipe_delimited")
        with open(args.target, "rb") as f:
            tgt_records = cp.parse_tanzil(f.read(), "pipe_delimited")
        if not args.no_basmala:
            src_records, tgt_records = cp.normalize_basmala(src_records, tgt_records)
    else:
        with open(args.source, "rb") as f:
            src_records = cp.parse_tanzil(f.read(), "line_aligned")
        with open(args.target, "rb") as f:
            tgt_records = cp.parse_tanzil(f.read(), "line_aligned")

    pairs = cp.align_pairs(src_records, tgt_records, keep_diacritics=not args.strip_diacritics)
    train_pairs, test_pairs = cp.split_corpus(pairs, args.train_fraction, args.seed)
    src_vocab = cp.build_vocab(train_pairs, "source", args.min_count)
    tgt_vocab = cp.build_vocab(train_pairs, "target", args.min_count)

    os.makedirs(args.out_dir, exist_ok=True)
    join = lambda name: os.path.join(args.out_dir, name)
    cp.write_pair_files(train_pairs, join("train.src"), join("train.tgt"))
    cp.write_pair_files(test_pairs, join("test.src"), join("test.tgt"))
    src_vocab.save_tsv(join("vocab.src.tsv"))
    tgt_vocab.save_tsv(join("vocab.tgt.tsv"))

    print(
        f"pairs={len(pairs)} train={len(train_pairs)} test={len(test_pairs)} "
        f"src_vocab={len(src_vocab)} tgt_vocab={len(tgt_vocab)}"
    )
    return 0


def cmd_train(args) -> int:
    config = TrainConfig(
        cell_type=args.cell,
        d=args.d,
        d_h=args.d_h,
        max_seq_len=args.max_len,
        train_batch=args.batch,
        valid_batch=args.valid_batch,
        lr=args.lr,
        epochs=args.epochs,
        checkpoint_every=args.checkpoint_every,
        seed=args.seed,
        clip_norm=None if args.no_clip else args.clip_norm,
        attention=args.attention,
    )
    data = lambda name: os.path.join(args.data_dir, name)
    train_pairs = cp.read_pair_files(data("train.src"), data("train.tgt"))
    if args.valid_src and args.valid_tgt:
        valid_pairs = cp.read_pair_files(args.valid_src, args.valid_tgt)
    elif os.path.exists(data("test.src")) and os.path.getsize(data("test.src")) > 0:
        valid_pairs = cp.read_pair_files(data("test.src"), data("test.tgt"))
    else:
        valid_pairs = train_pairs
    src_vocab = cp.Vocabulary.load_tsv(data("vocab.src.tsv"))
    tgt_vocab = cp.Vocabulary.load_tsv(data("vocab.tgt.tsv"))

    _, history = train(config, train_pairs, valid_pairs, src_vocab, tgt_vocab, out_dir=args.out_dir)
    for m in history:
        print(m.tsv_row())
    return 0


def cmd_translate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    lines = _read_tokenized_lines(args.input, keep_diacritics=not args.strip_diacritics)
    out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
    try:
        for tokens in lines:
            if not tokens:
                out.write("\n")
                continue
            ids = ckpt.src_vocab.encode(tokens)
            result = greedy_decode(ckpt.model, ids, max_len=args.max_len)
            out.write(" ".join(ckpt.tgt_vocab.decode(result.token_ids)) + "\n")
    finally:
        if args.output:
            out.close()
    return 0


def cmd_eval(args) -> int:
    keep = not args.strip_diacritics
    cands = _read_tokenized_lines(args.candidate, keep)
    refs = _read_tokenized_lines(args.reference, keep)
    config = ev.BleuConfig(max_n=args.max_n, smoothing=args.smoothing)
    report = ev.corpus_bleu(cands, refs, config)
    sys.stdout.write(ev.format_report_tsv([(args.name, report)], max_n=args.max_n))
    return 0


def cmd_compare(args) -> int:
    keep = not args.strip_diacritics
    refs = _read_tokenized_lines(args.reference, keep)
    outputs = {}
    for spec in args.system:
        name, _, path = spec.partition("=")
        if not name or not path:
            raise VersemtError(f"--system expects NAME=PATH, got {spec!r}")
        outputs[name] = _read_tokenized_lines(path, keep)
    config = ev.BleuConfig(max_n=args.max_n, smoothing=args.smoothing)
    rows = ev.compare_systems(outputs, refs, config)
    sys.stdout.write(ev.format_comparison_table(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as f:
            f.write(ev.format_comparison_csv(rows))
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            f.write(ev.format_report_tsv(rows, max_n=args.max_n))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="versemt",
        description="Attention-based encoder-decoder translation for small verse-aligned corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("corpus", help="build train/test splits and vocabularies", formatter_class=fmt)
    p.add_argument("--format", choices=["tanzil", "lines"], default="lines",
                   help="tanzil = chapter|verse|text lines; lines = one sentence per line")
    p.add_argument("--source", required=True, help="source-language input file")
    p.add_argument("--target", required=True, help="target-language input file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--min-count", type=int, default=1, help="minimum token frequency kept in vocab")
    p.add_argument("--strip-diacritics", action="store_true")
    p.add_argument("--no-basmala", action="store_true",
                   help="skip chapter-opening formula normalization (tanzil format only)")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="train a translation model", formatter_class=fmt)
    p.add_argument("--data-dir", required=True, help="directory produced by the corpus command")
    p.add_argument("--out-dir", required=True, help="where checkpoints and metrics.tsv go")
    p.add_argument("--cell", choices=["lstm", "gru"], default="lstm")
    p.add_argument("--max-len", type=int, default=44, help="drop pairs longer than this")
    p.add_argument("--batch", type=int, default=80, help="training batch size")
    p.add_argument("--valid-batch", type=int, default=40, help="validation batch size")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--checkpoint-every", type=int, default=10000,
                   help="also checkpoint every N training samples")
    p.add_argument("--d", type=int, default=128, help="embedding dimension")
    p.add_argument("--d-h", type=int, default=128, help="hidden state dimension")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--attention", choices=["general", "dot"], default="general")
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--no-clip", action="store_true", help="disable gradient clipping")
    p.add_argument("--valid-src", help="override validation source file")
    p.add_argument("--valid-tgt", help="override validation target file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="greedy-decode a source file", formatter_class=fmt)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="source sentences, one per line")
    p.add_argument("--output", help="target file (default: stdout)")
    p.add_argument("--max-len", type=int, default=44, help="decoding length cap")
    p.add_argument("--strip-diacritics", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="BLEU-score a candidate file against a reference", formatter_class=fmt)
    p.add_argument("--candidate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--name", default="candidate", help="system name printed in the report")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--smoothing", choices=["none", "epsilon"], default="epsilon")
    p.add_argument("--strip-diacritics", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="rank multiple systems against one reference", formatter_class=fmt)
    p.add_argument("--reference", required=True)
    p.add_argument("--system", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--csv", help="write bar-plot data (system,bleu) here")
    p.add_argument("--report", help="write the full per-system report TSV here")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--smoothing", choices=["none", "epsilon"], default="epsilon")
    p.add_argument("--strip-diacritics", action="store_true")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    shown = {k: v for k, v in vars(args).items() if k != "func"}
    log.info("resolved config: %s", json.dumps(shown, default=str, sort_keys=True))
    try:
        return args.func(args)
    except VersemtError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
