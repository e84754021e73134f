"""Binary checkpoint serialization.

File layout (all integers little-endian):

    bytes 0..3    magic b"ANMT"
    bytes 4..7    format version, uint32
    bytes 8..11   header length in bytes, uint32
    header        UTF-8 JSON: config, vocabularies, samples seen, Adam
                  step counter, metrics history, and a tensor manifest of
                  (name, shape, byte offset into the blob section)
    blobs         raw float64 arrays, back to back in manifest order

Round-trips are bit-exact: tensors are written and read as raw float64
bytes, so a loaded model reproduces the saved model's outputs identically.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .errors import CheckpointFormatError, CheckpointVersionError
from .seq2seq import Seq2SeqModel

MAGIC = b"ANMT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sII")


@dataclass
class Checkpoint:
    config: "TrainConfig"  # noqa: F821 - trainer imports this module
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    model: Seq2SeqModel
    adam: "AdamState | None"  # noqa: F821
    samples_seen: int
    metrics: list


def _collect_tensors(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    tensors = [(name, node.value) for name, node in ckpt.model.named_params()]
    if ckpt.adam is not None:
        for name, _ in ckpt.model.named_params():
            tensors.append((f"adam.m.{name}", ckpt.adam.m[name]))
            tensors.append((f"adam.v.{name}", ckpt.adam.v[name]))
    return tensors


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tensors = _collect_tensors(ckpt)
    manifest = []
    offset = 0
    blobs = []
    for name, arr in tensors:
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)

    header = {
        "config": dataclasses.asdict(ckpt.config),
        "src_vocab": {"tokens": ckpt.src_vocab.token_of, "counts": ckpt.src_vocab.counts},
        "tgt_vocab": {"tokens": ckpt.tgt_vocab.token_of, "counts": ckpt.tgt_vocab.counts},
        "samples_seen": ckpt.samples_seen,
        "adam_t": None if ckpt.adam is None else ckpt.adam.t,
        "metrics": [dataclasses.asdict(m) for m in ckpt.metrics],
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, ensure_ascii=True, sort_keys=True).encode("ascii")
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path) -> Checkpoint:
    from .trainer import AdamState, EpochMetrics, TrainConfig

    with open(path, "rb") as f:
        preamble = f.read(_PREAMBLE.size)
        if len(preamble) < _PREAMBLE.size:
            raise CheckpointFormatError("file too short for checkpoint preamble")
        magic, version, header_len = _PREAMBLE.unpack(preamble)
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(f"format version {version}, expected {FORMAT_VERSION}")
        try:
            header = json.loads(f.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointFormatError(f"unreadable header: {exc}") from None
        blob = f.read()

    config = TrainConfig(**header["config"])

    def vocab_from(entry) -> Vocabulary:
        return Vocabulary(entry["tokens"][4:], entry["counts"][4:])

    src_vocab = vocab_from(header["src_vocab"])
    tgt_vocab = vocab_from(header["tgt_vocab"])

    model = Seq2SeqModel(
        config.cell_type,
        len(src_vocab),
        len(tgt_vocab),
        config.d,
        config.d_h,
        np.random.default_rng(0),
        attention=config.attention,
    )
    slots: dict[str, np.ndarray] = {name: node.value for name, node in model.named_params()}
    adam = None
    if header["adam_t"] is not None:
        adam = AdamState(model.named_params(), config.beta1, config.beta2, config.adam_eps)
        adam.t = header["adam_t"]
        for name in list(slots):
            slots[f"adam.m.{name}"] = adam.m[name]
            slots[f"adam.v.{name}"] = adam.v[name]

    seen = set()
    for entry in header["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in slots:
            raise CheckpointFormatError(f"unknown tensor {name!r} in manifest")
        dest = slots[name]
        if dest.shape != shape:
            raise CheckpointFormatError(f"tensor {name!r}: shape {shape} != expected {dest.shape}")
        nbytes = dest.size * 8
        if offset + nbytes > len(blob):
            raise CheckpointFormatError(f"tensor {name!r} overruns blob section")
        dest[...] = np.frombuffer(blob, dtype="<f8", count=dest.size, offset=offset).reshape(shape)
        seen.add(name)
    missing = set(slots) - seen
    if missing:
        raise CheckpointFormatError(f"manifest missing tensors: {sorted(missing)}")

    metrics = [EpochMetrics(**m) for m in header["metrics"]]
    return Checkpoint(
        config=config,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        model=model,
        adam=adam,
        samples_seen=header["samples_seen"],
        metrics=metrics,
    )
