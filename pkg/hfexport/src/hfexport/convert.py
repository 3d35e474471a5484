"""Map BERT-family weight archives onto the adec tensor set.

Two architectures are understood: classic BERT encoders and DistilBERT.
Both are post-layer-norm transformers whose blocks line up one-to-one
with the adec encoder, so conversion is a renaming exercise plus two
mechanical fixups:

- torch Linear stores [out, in]; adec stores [in, out], so projection
  matrices are transposed (and nothing else is).
- BERT adds a token-type embedding to every position. Retrieval queries
  are single-segment, so row 0 of that table is folded into the word
  embeddings, which is numerically identical for segment-0 inputs.
  DistilBERT has no token-type table and needs no fold.

The pooler head, where present, is dropped: pooling here is mean/CLS
over hidden states and never uses it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from adec.encoder import (
    CLS,
    MEAN,
    EncoderConfig,
    EncoderModel,
    expected_shapes,
    weights_from_named,
)
from adec.model_io import default_vocab_name, save
from adec.numerics import Tensor
from adec.tokenizer import Vocab, load_vocab

_FAMILIES = ("bert", "distilbert")


class ExportError(Exception):
    """Unsupported source architecture, missing tensors, or bad shapes."""


@dataclass(frozen=True)
class ExportSpec:
    source: str
    out_path: str
    pooling: str = MEAN
    max_len: int | None = None
    model_id: str | None = None

    def __post_init__(self):
        if self.pooling not in (MEAN, CLS):
            raise ValueError(f"pooling must be {MEAN!r} or {CLS!r}, got {self.pooling!r}")
        if self.max_len is not None and self.max_len < 1:
            raise ValueError("max_len override must be >= 1")


@dataclass
class ExportResult:
    checkpoint_path: str
    vocab_path: str
    model: EncoderModel
    tensor_count: int


def _as_f32(name: str, array: np.ndarray) -> np.ndarray:
    if array.dtype != np.float32:
        raise ExportError(
            f"{name} has dtype {array.dtype}; only float32 sources are exported "
            "(weights are never retyped)"
        )
    return array


def load_source(source: str):
    """Return (state dict as numpy, source config, model_type)."""
    from transformers import AutoConfig, AutoModel

    try:
        config = AutoConfig.from_pretrained(source)
    except Exception as e:
        raise ExportError(f"cannot read a model config from {source!r}: {e}") from e
    if config.model_type not in _FAMILIES:
        raise ExportError(
            f"unsupported architecture family {config.model_type!r}; "
            f"supported: {', '.join(_FAMILIES)}"
        )
    model = AutoModel.from_pretrained(source)
    state = {
        name: _as_f32(name, tensor.detach().cpu().numpy())
        for name, tensor in model.state_dict().items()
    }
    return state, config, config.model_type


def _take(state: dict, key: str) -> np.ndarray:
    if key not in state:
        raise ExportError(f"source is missing tensor {key!r}")
    return state[key]


def _map_bert(state: dict, num_layers: int) -> dict:
    token_type = _take(state, "embeddings.token_type_embeddings.weight")
    named = {
        "embeddings.word": _take(state, "embeddings.word_embeddings.weight") + token_type[0],
        "embeddings.position": _take(state, "embeddings.position_embeddings.weight"),
        "embeddings.norm.gamma": _take(state, "embeddings.LayerNorm.weight"),
        "embeddings.norm.beta": _take(state, "embeddings.LayerNorm.bias"),
    }
    for i in range(num_layers):
        src = f"encoder.layer.{i}"
        dst = f"layers.{i}"
        for part in ("query", "key", "value"):
            named[f"{dst}.attention.{part}.weight"] = _take(
                state, f"{src}.attention.self.{part}.weight"
            ).T
            named[f"{dst}.attention.{part}.bias"] = _take(
                state, f"{src}.attention.self.{part}.bias"
            )
        named[f"{dst}.attention.output.weight"] = _take(
            state, f"{src}.attention.output.dense.weight"
        ).T
        named[f"{dst}.attention.output.bias"] = _take(state, f"{src}.attention.output.dense.bias")
        named[f"{dst}.attention.norm.gamma"] = _take(
            state, f"{src}.attention.output.LayerNorm.weight"
        )
        named[f"{dst}.attention.norm.beta"] = _take(
            state, f"{src}.attention.output.LayerNorm.bias"
        )
        named[f"{dst}.ffn.intermediate.weight"] = _take(state, f"{src}.intermediate.dense.weight").T
        named[f"{dst}.ffn.intermediate.bias"] = _take(state, f"{src}.intermediate.dense.bias")
        named[f"{dst}.ffn.output.weight"] = _take(state, f"{src}.output.dense.weight").T
        named[f"{dst}.ffn.output.bias"] = _take(state, f"{src}.output.dense.bias")
        named[f"{dst}.ffn.norm.gamma"] = _take(state, f"{src}.output.LayerNorm.weight")
        named[f"{dst}.ffn.norm.beta"] = _take(state, f"{src}.output.LayerNorm.bias")
    return named


def _map_distilbert(state: dict, num_layers: int) -> dict:
    named = {
        "embeddings.word": _take(state, "embeddings.word_embeddings.weight"),
        "embeddings.position": _take(state, "embeddings.position_embeddings.weight"),
        "embeddings.norm.gamma": _take(state, "embeddings.LayerNorm.weight"),
        "embeddings.norm.beta": _take(state, "embeddings.LayerNorm.bias"),
    }
    lin = {"query": "q_lin", "key": "k_lin", "value": "v_lin"}
    for i in range(num_layers):
        src = f"transformer.layer.{i}"
        dst = f"layers.{i}"
        for part, name in lin.items():
            named[f"{dst}.attention.{part}.weight"] = _take(
                state, f"{src}.attention.{name}.weight"
            ).T
            named[f"{dst}.attention.{part}.bias"] = _take(state, f"{src}.attention.{name}.bias")
        named[f"{dst}.attention.output.weight"] = _take(state, f"{src}.attention.out_lin.weight").T
        named[f"{dst}.attention.output.bias"] = _take(state, f"{src}.attention.out_lin.bias")
        named[f"{dst}.attention.norm.gamma"] = _take(state, f"{src}.sa_layer_norm.weight")
        named[f"{dst}.attention.norm.beta"] = _take(state, f"{src}.sa_layer_norm.bias")
        named[f"{dst}.ffn.intermediate.weight"] = _take(state, f"{src}.ffn.lin1.weight").T
        named[f"{dst}.ffn.intermediate.bias"] = _take(state, f"{src}.ffn.lin1.bias")
        named[f"{dst}.ffn.output.weight"] = _take(state, f"{src}.ffn.lin2.weight").T
        named[f"{dst}.ffn.output.bias"] = _take(state, f"{src}.ffn.lin2.bias")
        named[f"{dst}.ffn.norm.gamma"] = _take(state, f"{src}.output_layer_norm.weight")
        named[f"{dst}.ffn.norm.beta"] = _take(state, f"{src}.output_layer_norm.bias")
    return named


def _dims(config, model_type: str) -> dict:
    if model_type == "bert":
        return {
            "num_layers": config.num_hidden_layers,
            "hidden_dim": config.hidden_size,
            "num_heads": config.num_attention_heads,
            "ff_dim": config.intermediate_size,
            "max_len": config.max_position_embeddings,
        }
    return {
        "num_layers": config.n_layers,
        "hidden_dim": config.dim,
        "num_heads": config.n_heads,
        "ff_dim": config.hidden_dim,
        "max_len": config.max_position_embeddings,
    }


def map_source(source: str, pooling: str = MEAN, max_len: int | None = None):
    """Convert a source archive to (named tensors, EncoderConfig, family).

    The heavy lifting behind both export and the failure diagnosis in
    verify, so the two always agree on what the checkpoint should hold.
    """
    state, config, model_type = load_source(source)
    dims = _dims(config, model_type)
    if model_type == "bert":
        named = _map_bert(state, dims["num_layers"])
    else:
        named = _map_distilbert(state, dims["num_layers"])

    if max_len is not None:
        if max_len > dims["max_len"]:
            raise ExportError(
                f"max_len override {max_len} exceeds the source's "
                f"{dims['max_len']} position embeddings"
            )
        named["embeddings.position"] = named["embeddings.position"][:max_len]
        dims["max_len"] = max_len

    encoder_config = EncoderConfig(
        vocab_size=named["embeddings.word"].shape[0],
        pooling=pooling,
        **dims,
    )
    expected = expected_shapes(encoder_config)
    problems = [
        f"{name}: got {tuple(array.shape)}, expected {tuple(expected[name])}"
        for name, array in named.items()
        if tuple(array.shape) != tuple(expected[name])
    ]
    if problems:
        raise ExportError("shape inconsistency: " + "; ".join(sorted(problems)))
    return named, encoder_config, model_type


def _source_vocab(source: str) -> Vocab:
    path = os.path.join(source, "vocab.txt")
    if not os.path.isdir(source) or not os.path.isfile(path):
        raise ExportError(
            f"no vocab.txt in {source!r}; export needs a local archive directory "
            "holding the model files and its wordpiece vocabulary"
        )
    return load_vocab(path)


def export(spec: ExportSpec) -> ExportResult:
    """Write the source as an adec checkpoint plus vocab file."""
    named, config, model_type = map_source(
        spec.source, pooling=spec.pooling, max_len=spec.max_len
    )
    vocab = _source_vocab(spec.source)
    if len(vocab) != config.vocab_size:
        raise ExportError(
            f"vocab.txt has {len(vocab)} tokens but the word embedding table "
            f"has {config.vocab_size} rows"
        )

    weights = weights_from_named(
        {name: Tensor(array) for name, array in named.items()}, config.num_layers
    )
    model = EncoderModel(
        config=config,
        weights=weights,
        vocab=vocab,
        provenance={
            "model_id": spec.model_id or os.path.basename(os.path.normpath(spec.source)),
            "source": str(spec.source),
            "source_family": model_type,
        },
    )

    out_dir = os.path.dirname(os.path.abspath(spec.out_path))
    os.makedirs(out_dir, exist_ok=True)
    save(model, spec.out_path)
    vocab_path = os.path.join(
        os.path.dirname(spec.out_path) or ".", default_vocab_name(spec.out_path)
    )
    return ExportResult(
        checkpoint_path=spec.out_path,
        vocab_path=vocab_path,
        model=model,
        tensor_count=len(named),
    )
