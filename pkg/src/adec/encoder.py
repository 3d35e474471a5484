"""Configurable-depth transformer text encoder with pooled sentence output.

One implementation plays both roles of the asymmetric retriever: the deep
teacher that indexes documents and the shallow student that encodes
queries. Blocks are post-layer-norm BERT style (attention, add and norm,
feed-forward, add and norm) with learned absolute positions; padding is
masked out of attention with an additive -1e9 bias before the softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .numerics import Tensor
from .tokenizer import EncodedBatch, Vocab, batch_encode

MEAN = "mean"
CLS = "cls"
_POOLING = (MEAN, CLS)

ATTENTION_MASK_BIAS = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int
    hidden_dim: int
    num_heads: int
    ff_dim: int
    max_len: int
    vocab_size: int
    pooling: str = MEAN

    def __post_init__(self):
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")
        for name in ("hidden_dim", "num_heads", "ff_dim", "max_len", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.pooling not in _POOLING:
            raise ValueError(f"pooling must be one of {_POOLING}, got {self.pooling!r}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


@dataclass
class LayerWeights:
    """One transformer block; projection matrices are [in, out]: y = x @ W + b."""

    query_w: Tensor
    query_b: Tensor
    key_w: Tensor
    key_b: Tensor
    value_w: Tensor
    value_b: Tensor
    output_w: Tensor
    output_b: Tensor
    attn_norm_gamma: Tensor
    attn_norm_beta: Tensor
    ffn_inter_w: Tensor
    ffn_inter_b: Tensor
    ffn_out_w: Tensor
    ffn_out_b: Tensor
    ffn_norm_gamma: Tensor
    ffn_norm_beta: Tensor


@dataclass
class EncoderWeights:
    word_embedding: Tensor
    position_embedding: Tensor
    emb_norm_gamma: Tensor
    emb_norm_beta: Tensor
    layers: list[LayerWeights] = field(default_factory=list)


_LAYER_FIELDS = (
    ("attention.query.weight", "query_w"),
    ("attention.query.bias", "query_b"),
    ("attention.key.weight", "key_w"),
    ("attention.key.bias", "key_b"),
    ("attention.value.weight", "value_w"),
    ("attention.value.bias", "value_b"),
    ("attention.output.weight", "output_w"),
    ("attention.output.bias", "output_b"),
    ("attention.norm.gamma", "attn_norm_gamma"),
    ("attention.norm.beta", "attn_norm_beta"),
    ("ffn.intermediate.weight", "ffn_inter_w"),
    ("ffn.intermediate.bias", "ffn_inter_b"),
    ("ffn.output.weight", "ffn_out_w"),
    ("ffn.output.bias", "ffn_out_b"),
    ("ffn.norm.gamma", "ffn_norm_gamma"),
    ("ffn.norm.beta", "ffn_norm_beta"),
)

_EMBEDDING_FIELDS = (
    ("embeddings.word", "word_embedding"),
    ("embeddings.position", "position_embedding"),
    ("embeddings.norm.gamma", "emb_norm_gamma"),
    ("embeddings.norm.beta", "emb_norm_beta"),
)


def tensor_names(num_layers: int) -> list[str]:
    """Canonical tensor name list for a given depth (4 + 16 per layer)."""
    names = [name for name, _ in _EMBEDDING_FIELDS]
    for i in range(num_layers):
        names.extend(f"layers.{i}.{suffix}" for suffix, _ in _LAYER_FIELDS)
    return names


def named_tensors(weights: EncoderWeights) -> list[tuple[str, Tensor]]:
    pairs = [(name, getattr(weights, attr)) for name, attr in _EMBEDDING_FIELDS]
    for i, layer in enumerate(weights.layers):
        pairs.extend(
            (f"layers.{i}.{suffix}", getattr(layer, attr)) for suffix, attr in _LAYER_FIELDS
        )
    return pairs


def weights_from_named(tensors: dict, num_layers: int) -> EncoderWeights:
    """Rebuild structured weights from a name -> Tensor mapping."""
    expected = set(tensor_names(num_layers))
    given = set(tensors)
    if given != expected:
        missing = sorted(expected - given)
        extra = sorted(given - expected)
        raise ValueError(f"tensor name mismatch: missing {missing}, unexpected {extra}")
    weights = EncoderWeights(
        **{attr: tensors[name] for name, attr in _EMBEDDING_FIELDS},
        layers=[
            LayerWeights(
                **{attr: tensors[f"layers.{i}.{suffix}"] for suffix, attr in _LAYER_FIELDS}
            )
            for i in range(num_layers)
        ],
    )
    return weights


def parameters(weights: EncoderWeights) -> list[Tensor]:
    return [t for _, t in named_tensors(weights)]


def expected_shapes(config: EncoderConfig) -> dict:
    h, f = config.hidden_dim, config.ff_dim
    shapes = {
        "embeddings.word": (config.vocab_size, h),
        "embeddings.position": (config.max_len, h),
        "embeddings.norm.gamma": (h,),
        "embeddings.norm.beta": (h,),
    }
    per_layer = {
        "attention.query.weight": (h, h),
        "attention.query.bias": (h,),
        "attention.key.weight": (h, h),
        "attention.key.bias": (h,),
        "attention.value.weight": (h, h),
        "attention.value.bias": (h,),
        "attention.output.weight": (h, h),
        "attention.output.bias": (h,),
        "attention.norm.gamma": (h,),
        "attention.norm.beta": (h,),
        "ffn.intermediate.weight": (h, f),
        "ffn.intermediate.bias": (f,),
        "ffn.output.weight": (f, h),
        "ffn.output.bias": (h,),
        "ffn.norm.gamma": (h,),
        "ffn.norm.beta": (h,),
    }
    for i in range(config.num_layers):
        for suffix, shape in per_layer.items():
            shapes[f"layers.{i}.{suffix}"] = shape
    return shapes


def validate_weights(weights: EncoderWeights, config: EncoderConfig) -> None:
    if len(weights.layers) != config.num_layers:
        raise ValueError(
            f"weights carry {len(weights.layers)} layers, config says {config.num_layers}"
        )
    shapes = expected_shapes(config)
    for name, tensor in named_tensors(weights):
        if tensor.shape != shapes[name]:
            raise ValueError(f"{name}: shape {tensor.shape}, expected {shapes[name]}")


def init_random(config: EncoderConfig, seed: int) -> EncoderWeights:
    """BERT-style init: normal(0, 0.02) matrices, zero biases, identity norms."""
    rng = np.random.default_rng(seed)

    def normal(shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape).astype(np.float32))

    def zeros(shape):
        return Tensor(np.zeros(shape, dtype=np.float32))

    def ones(shape):
        return Tensor(np.ones(shape, dtype=np.float32))

    shapes = expected_shapes(config)
    tensors = {}
    for name, shape in shapes.items():
        if name.endswith(".gamma"):
            tensors[name] = ones(shape)
        elif name.endswith(".bias") or name.endswith(".beta"):
            tensors[name] = zeros(shape)
        else:
            tensors[name] = normal(shape)
    return weights_from_named(tensors, config.num_layers)


def forward(batch: EncodedBatch, weights: EncoderWeights, config: EncoderConfig) -> Tensor:
    """Token embeddings [batch x len x hidden] for an encoded batch.

    Padding positions receive values too; downstream pooling drops them
    via the attention mask.
    """
    ids = batch.token_ids
    b, length = ids.shape
    if length > config.max_len:
        raise ValueError(f"sequence length {length} exceeds max_len {config.max_len}")
    if ids.size and ids.max() >= config.vocab_size:
        raise IndexError(f"token id {ids.max()} out of range for vocab {config.vocab_size}")
    dtype = weights.word_embedding.dtype.type

    tok = nm.embedding(weights.word_embedding, ids)
    pos = nm.embedding(weights.position_embedding, np.arange(length))
    h = nm.layer_norm(nm.add(tok, pos), weights.emb_norm_gamma, weights.emb_norm_beta)

    if not weights.layers:
        return h

    # [b, 1, 1, len] additive bias: 0 on real tokens, -1e9 on padding
    mask_bias = Tensor(
        ((1 - batch.attention_mask[:, None, None, :]) * ATTENTION_MASK_BIAS).astype(dtype),
        dtype=dtype,
    )
    nh, dh = config.num_heads, config.head_dim

    def split_heads(x: Tensor) -> Tensor:
        return nm.transpose(nm.reshape(x, (b, length, nh, dh)), (0, 2, 1, 3))

    for layer in weights.layers:
        q = split_heads(nm.add(nm.matmul(h, layer.query_w), layer.query_b))
        k = split_heads(nm.add(nm.matmul(h, layer.key_w), layer.key_b))
        v = split_heads(nm.add(nm.matmul(h, layer.value_w), layer.value_b))

        scores = nm.scale(nm.matmul(q, nm.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        probs = nm.softmax(nm.add(scores, mask_bias), axis=-1)
        ctx = nm.reshape(nm.transpose(nm.matmul(probs, v), (0, 2, 1, 3)), (b, length, -1))
        attn = nm.add(nm.matmul(ctx, layer.output_w), layer.output_b)
        h = nm.layer_norm(nm.add(h, attn), layer.attn_norm_gamma, layer.attn_norm_beta)

        inter = nm.gelu(nm.add(nm.matmul(h, layer.ffn_inter_w), layer.ffn_inter_b))
        ffn = nm.add(nm.matmul(inter, layer.ffn_out_w), layer.ffn_out_b)
        h = nm.layer_norm(nm.add(h, ffn), layer.ffn_norm_gamma, layer.ffn_norm_beta)
    return h


def pool(token_embs: Tensor, mask: np.ndarray, strategy: str) -> Tensor:
    """Sentence embeddings [batch x hidden] from token embeddings."""
    if strategy not in _POOLING:
        raise ValueError(f"unknown pooling strategy {strategy!r}")
    dtype = token_embs.dtype.type
    if strategy == MEAN:
        counts = mask.sum(axis=1)
        if (counts == 0).any():
            raise ValueError("mean pooling over an all-zero mask row")
        weighted = nm.mul(token_embs, Tensor(mask[:, :, None].astype(dtype), dtype=dtype))
        summed = nm.tensor_sum(weighted, axis=1)
        inv = Tensor((1.0 / counts)[:, None].astype(dtype), dtype=dtype)
        return nm.mul(summed, inv)
    # CLS: position-0 vector, written as a differentiable select-and-reduce
    selector = np.zeros((1, token_embs.shape[1], 1), dtype=dtype)
    selector[0, 0, 0] = 1.0
    picked = nm.mul(token_embs, Tensor(selector, dtype=dtype))
    return nm.tensor_sum(picked, axis=1)


@dataclass
class EncoderModel:
    """A loaded encoder: config, weights, vocabulary, and provenance notes."""

    config: EncoderConfig
    weights: EncoderWeights
    vocab: Vocab
    provenance: dict = field(default_factory=dict)

    def encode_batch(self, batch: EncodedBatch) -> Tensor:
        token_embs = forward(batch, self.weights, self.config)
        return pool(token_embs, batch.attention_mask, self.config.pooling)

    def encode(self, texts, batch_size: int = 64) -> np.ndarray:
        """Embed texts in order; returns float32 [n x hidden_dim].

        Chunking never changes results: masked positions contribute
        exactly zero, so a query embeds identically alone or in a batch.
        """
        texts = list(texts)
        out = np.empty((len(texts), self.config.hidden_dim), dtype=np.float32)
        for start in range(0, len(texts), batch_size):
            chunk = texts[start : start + batch_size]
            batch = batch_encode(chunk, self.vocab, self.config.max_len)
            out[start : start + len(chunk)] = self.encode_batch(batch).data.astype(np.float32)
        return out
