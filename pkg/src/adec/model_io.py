"""Checkpoint persistence and teacher-layer extraction.

File format (version 1), also described in docs/checkpoint_format.md:

    bytes 0..3    magic "ADEC"
    byte  4       format version (0x01)
    bytes 5..12   little-endian uint64 header length N
    bytes 13..    UTF-8 JSON header (config, manifest, provenance, vocab file)
    ...           zero padding to the next 64-byte boundary
    payload       raw little-endian float32 tensors, row-major; every
                  manifest offset is relative to the payload start and
                  64-byte aligned

The header is self-contained so tools can inspect a checkpoint without
scanning the payload. Files are written atomically (temp file + rename).
The vocabulary travels as a sibling text file referenced by relative name.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import encoder
from .encoder import EncoderConfig, EncoderModel
from .numerics import Tensor
from .tokenizer import Vocab, load_vocab, save_vocab

MAGIC = b"ADEC"
FORMAT_VERSION = 1
_ALIGN = 64


class CheckpointFormatError(ValueError):
    """The file is not a valid version-1 checkpoint."""


@dataclass(frozen=True)
class LayerScheme:
    """Strictly increasing teacher layer indices to keep in a student."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ValueError("a layer scheme cannot be empty")
        if any(i < 0 for i in self.indices):
            raise IndexError("layer indices must be non-negative")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError(f"layer indices must be strictly increasing, got {self.indices}")

    def validate_for(self, teacher_layers: int) -> None:
        if self.indices[-1] >= teacher_layers:
            raise IndexError(
                f"layer index {self.indices[-1]} out of range for a "
                f"{teacher_layers}-layer teacher"
            )

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


# Appendix-style canonical subsets for a 12-layer teacher: five 4-layer,
# four 2-layer, four 1-layer combinations.
_CANONICAL_12 = (
    (1, 4, 7, 10),
    (0, 1, 10, 11),
    (0, 1, 2, 3),
    (4, 5, 6, 7),
    (8, 9, 10, 11),
    (0, 10),
    (0, 11),
    (1, 10),
    (1, 11),
    (0,),
    (1,),
    (10,),
    (11,),
)


def builtin_schemes(teacher_layers: int = 12) -> list[LayerScheme]:
    """Canonical layer subsets; 13 for a 12-layer teacher.

    Other depths get the first/last-analogue shortlist: 1-layer {first},
    {last}; 2-layer {first, last}; 4-layer {first two, last two}.
    """
    if teacher_layers < 1:
        raise ValueError("teacher must have at least one layer")
    if teacher_layers == 12:
        return [LayerScheme(s) for s in _CANONICAL_12]
    last = teacher_layers - 1
    schemes = []
    if teacher_layers >= 4:
        schemes.append(LayerScheme((0, 1, last - 1, last)))
    if teacher_layers >= 2:
        schemes.append(LayerScheme((0, last)))
    schemes.append(LayerScheme((0,)))
    if teacher_layers >= 2:
        schemes.append(LayerScheme((last,)))
    return schemes


def compose_schemes(first: LayerScheme, second: LayerScheme) -> LayerScheme:
    """Scheme equivalent to extracting ``first`` and then ``second``."""
    second.validate_for(len(first))
    return LayerScheme(tuple(first.indices[i] for i in second))


def _config_dict(config: EncoderConfig) -> dict:
    return dataclasses.asdict(config)


def _config_from_dict(d: dict) -> EncoderConfig:
    try:
        return EncoderConfig(**d)
    except TypeError as e:
        raise CheckpointFormatError(f"bad config block: {e}") from e


def checkpoint_bytes(model: EncoderModel, vocab_file: str) -> bytes:
    """Serialize a model to checkpoint bytes (deterministic)."""
    encoder.validate_weights(model.weights, model.config)
    pairs = encoder.named_tensors(model.weights)
    manifest = []
    offset = 0
    for name, tensor in pairs:
        nbytes = tensor.size * 4
        manifest.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(tensor.shape),
                "offset": offset,
                "nbytes": nbytes,
            }
        )
        offset += nbytes
        offset += (-offset) % _ALIGN
    header = {
        "format": "adec-checkpoint",
        "version": FORMAT_VERSION,
        "config": _config_dict(model.config),
        "vocab_file": vocab_file,
        "manifest": manifest,
        "provenance": model.provenance,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    prefix_len = len(MAGIC) + 1 + 8 + len(header_bytes)
    pad = (-prefix_len) % _ALIGN

    parts = [
        MAGIC,
        bytes([FORMAT_VERSION]),
        len(header_bytes).to_bytes(8, "little"),
        header_bytes,
        b"\x00" * pad,
    ]
    for entry, (_, tensor) in zip(manifest, pairs):
        parts.append(tensor.data.astype("<f4", copy=False).tobytes(order="C"))
        parts.append(b"\x00" * ((-entry["nbytes"]) % _ALIGN))
    blob = b"".join(parts)
    # the payload ends with the last tensor's bytes, no trailing alignment
    end = _payload_start(len(header_bytes)) + manifest[-1]["offset"] + manifest[-1]["nbytes"]
    return blob[:end]


def _payload_start(header_len: int) -> int:
    prefix = len(MAGIC) + 1 + 8 + header_len
    return prefix + ((-prefix) % _ALIGN)


def fingerprint(model: EncoderModel, vocab_file: str = "vocab.txt") -> str:
    """SHA-256 of the serialized checkpoint; stable encoder identity."""
    return hashlib.sha256(checkpoint_bytes(model, vocab_file)).hexdigest()


def default_vocab_name(path) -> str:
    stem = os.path.basename(os.fspath(path))
    if stem.endswith(".adec"):
        stem = stem[: -len(".adec")]
    return stem + ".vocab.txt"


def save(model: EncoderModel, path, vocab_file: str | None = None) -> None:
    """Write checkpoint plus sibling vocab file; load(save(m)) == m bitwise."""
    path = os.fspath(path)
    vocab_file = vocab_file or default_vocab_name(path)
    blob = checkpoint_bytes(model, vocab_file)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".adec-tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    vocab_path = os.path.join(directory, vocab_file)
    vtmp = vocab_path + ".tmp"
    save_vocab(model.vocab, vtmp)
    os.replace(vtmp, vocab_path)


def read_header(path) -> dict:
    """Parse and validate the header block only (no payload scan)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic bytes {magic!r}, expected {MAGIC!r}")
        version = f.read(1)
        if len(version) != 1 or version[0] != FORMAT_VERSION:
            raise CheckpointFormatError(f"unsupported format version {version!r}")
        raw_len = f.read(8)
        if len(raw_len) != 8:
            raise CheckpointFormatError("truncated header length field")
        header_len = int.from_bytes(raw_len, "little")
        header_bytes = f.read(header_len)
        if len(header_bytes) != header_len:
            raise CheckpointFormatError("truncated header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"header is not valid JSON: {e}") from e
    for key in ("config", "manifest", "vocab_file", "provenance"):
        if key not in header:
            raise CheckpointFormatError(f"header missing {key!r}")
    header["_header_len"] = header_len
    return header


def _validate_provenance(provenance: dict) -> None:
    for entry in provenance.get("history", []):
        scheme = LayerScheme(tuple(entry["scheme"]))
        scheme.validate_for(int(entry["teacher_layers"]))


def load(path) -> EncoderModel:
    """Load and validate a version-1 checkpoint and its vocabulary."""
    path = os.fspath(path)
    header = read_header(path)
    config = _config_from_dict(header["config"])
    manifest = header["manifest"]

    names = [entry["name"] for entry in manifest]
    if len(set(names)) != len(names):
        raise CheckpointFormatError("duplicate tensor names in manifest")
    expected = encoder.expected_shapes(config)
    unknown = sorted(set(names) - set(expected))
    if unknown:
        raise CheckpointFormatError(f"unknown tensor names: {unknown}")
    missing = sorted(set(expected) - set(names))
    if missing:
        raise CheckpointFormatError(f"missing tensors: {missing}")

    payload_start = _payload_start(header["_header_len"])
    end = 0
    for entry in manifest:
        if entry["dtype"] != "f32":
            raise CheckpointFormatError(f"{entry['name']}: unsupported dtype {entry['dtype']}")
        span = int(np.prod(entry["shape"], dtype=np.int64)) * 4
        if span != entry["nbytes"]:
            raise CheckpointFormatError(
                f"{entry['name']}: shape {entry['shape']} implies {span} bytes, "
                f"manifest says {entry['nbytes']}"
            )
        if tuple(entry["shape"]) != expected[entry["name"]]:
            raise CheckpointFormatError(
                f"{entry['name']}: shape {tuple(entry['shape'])} inconsistent with "
                f"config (expected {expected[entry['name']]})"
            )
        end = max(end, entry["offset"] + entry["nbytes"])

    file_size = os.path.getsize(path)
    if file_size != payload_start + end:
        raise CheckpointFormatError(
            f"payload length mismatch: file has {file_size - payload_start} payload "
            f"bytes, manifest requires {end}"
        )

    _validate_provenance(header["provenance"])

    tensors = {}
    with open(path, "rb") as f:
        for entry in manifest:
            f.seek(payload_start + entry["offset"])
            raw = f.read(entry["nbytes"])
            if len(raw) != entry["nbytes"]:
                raise CheckpointFormatError(f"{entry['name']}: truncated payload")
            arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
            tensors[entry["name"]] = Tensor(arr)

    weights = encoder.weights_from_named(tensors, config.num_layers)
    vocab_path = os.path.join(os.path.dirname(path) or ".", header["vocab_file"])
    vocab = load_vocab(vocab_path)
    if len(vocab) != config.vocab_size:
        raise CheckpointFormatError(
            f"vocab file has {len(vocab)} tokens, config says {config.vocab_size}"
        )
    return EncoderModel(
        config=config, weights=weights, vocab=vocab, provenance=header["provenance"]
    )


def _copy_tensor(t: Tensor) -> Tensor:
    return Tensor(t.data.copy())


def extract_layers(teacher: EncoderModel, scheme: LayerScheme) -> EncoderModel:
    """Student initialized from a subset of the teacher's layers.

    Embedding tables, embedding layer norm, vocabulary, and pooling carry
    over unchanged; the chosen transformer layers are renumbered 0..k-1.
    Provenance records the teacher and scheme so the chain back to the
    original model stays reconstructible.
    """
    scheme.validate_for(teacher.config.num_layers)
    w = teacher.weights
    student_weights = encoder.EncoderWeights(
        word_embedding=_copy_tensor(w.word_embedding),
        position_embedding=_copy_tensor(w.position_embedding),
        emb_norm_gamma=_copy_tensor(w.emb_norm_gamma),
        emb_norm_beta=_copy_tensor(w.emb_norm_beta),
        layers=[
            encoder.LayerWeights(
                **{
                    field.name: _copy_tensor(getattr(w.layers[i], field.name))
                    for field in dataclasses.fields(encoder.LayerWeights)
                }
            )
            for i in scheme
        ],
    )
    config = dataclasses.replace(teacher.config, num_layers=len(scheme))
    teacher_id = teacher.provenance.get("model_id", "unknown")
    provenance = {
        "model_id": f"{teacher_id}#layers{list(scheme.indices)}",
        "teacher_id": teacher_id,
        "layer_indices": list(scheme.indices),
        "history": list(teacher.provenance.get("history", []))
        + [
            {
                "teacher_id": teacher_id,
                "teacher_layers": teacher.config.num_layers,
                "scheme": list(scheme.indices),
            }
        ],
    }
    return EncoderModel(
        config=config, weights=student_weights, vocab=teacher.vocab, provenance=provenance
    )


def origin(provenance: dict) -> tuple[str, LayerScheme | None]:
    """Original teacher id and the composed scheme across all extractions."""
    history = provenance.get("history", [])
    if not history:
        return provenance.get("model_id", "unknown"), None
    composed = LayerScheme(tuple(history[0]["scheme"]))
    for entry in history[1:]:
        composed = compose_schemes(composed, LayerScheme(tuple(entry["scheme"])))
    return history[0]["teacher_id"], composed
