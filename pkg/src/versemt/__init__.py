"""Attention-based encoder-decoder translation engine for small verse-aligned corpora."""

from .autodiff import Node, Tape
from .cells import CellState, GruCell, LstmCell, make_cell, unroll
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    ParallelCorpus,
    SentencePair,
    VerseRecord,
    Vocabulary,
    align_pairs,
    build_vocab,
    normalize_basmala,
    parse_tanzil,
    split_corpus,
    strip_punctuation_and_tokenize,
)
from .evaluation import (
    BleuConfig,
    BleuReport,
    brevity_penalty,
    compare_systems,
    corpus_bleu,
    ngram_precision,
    perplexity,
)
from .seq2seq import (
    DecodeResult,
    Seq2SeqModel,
    attend,
    decode_step,
    encode,
    greedy_decode,
    sequence_loss,
)
from .trainer import (
    AdamState,
    EpochMetrics,
    TrainConfig,
    adam_update,
    filter_by_length,
    make_batches,
    train,
    validate,
)

__version__ = "0.1.0"
