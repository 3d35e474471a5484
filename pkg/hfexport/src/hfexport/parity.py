"""Numerical parity between a source model and its exported checkpoint.

The check feeds both models the same pre-tokenized id sequences and
compares pooled embeddings. Ids rather than sentences on purpose: the
adec tokenizer is a simplified wordpiece and may split text differently
than the source's tokenizer, and this check is about weights, not
tokenization. The two models see byte-for-byte identical inputs, so any
disagreement is a conversion defect (or float32 accumulation order,
which stays far below the 1e-4 threshold).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from adec.encoder import CLS, MEAN, EncoderModel
from adec.model_io import load
from adec.tokenizer import EncodedBatch

from .convert import ExportError, map_source

DEFAULT_PROBES = 32
DEFAULT_THRESHOLD = 1e-4


@dataclass
class ParityReport:
    passed: bool
    max_abs_diff: float
    threshold: float
    per_probe: list[float]
    pooling: str
    mismatched_tensors: list[tuple[str, float]] = field(default_factory=list)

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"parity {status}: max abs pooled diff {self.max_abs_diff:.3e} "
            f"(threshold {self.threshold:.1e}) over {len(self.per_probe)} probes, "
            f"{self.pooling} pooling"
        ]
        if not self.passed:
            worst = int(np.argmax(self.per_probe))
            lines.append(f"worst probe: #{worst} at {self.per_probe[worst]:.3e}")
            if self.mismatched_tensors:
                lines.append("tensors that disagree with a fresh conversion:")
                for name, diff in self.mismatched_tensors:
                    lines.append(f"  {name}: max abs diff {diff:.3e}")
            else:
                lines.append(
                    "stored tensors match a fresh conversion; the gap is in "
                    "config or vocabulary, not weights"
                )
        return "\n".join(lines)


def probe_id_batch(vocab_size: int, max_len: int, count: int = DEFAULT_PROBES,
                   seed: int = 0) -> EncodedBatch:
    """Deterministic padded batch of random id sequences."""
    if count < 1:
        raise ValueError("probe set must not be empty")
    if vocab_size < 1 or max_len < 1:
        raise ValueError("vocab_size and max_len must be >= 1")
    rng = np.random.default_rng(seed)
    longest = min(24, max_len)
    if longest >= 3:
        lengths = rng.integers(3, longest + 1, size=count)
    else:
        lengths = np.full(count, longest)
    ids = np.zeros((count, int(lengths.max())), dtype=np.int64)
    mask = np.zeros_like(ids)
    for row, n in enumerate(lengths):
        ids[row, :n] = rng.integers(0, vocab_size, size=int(n))
        mask[row, :n] = 1
    return EncodedBatch(token_ids=ids, attention_mask=mask)


def _source_pooled(source: str, batch: EncodedBatch, pooling: str) -> np.ndarray:
    import torch
    from transformers import AutoModel

    model = AutoModel.from_pretrained(source).eval()
    with torch.no_grad():
        hidden = model(
            input_ids=torch.from_numpy(batch.token_ids),
            attention_mask=torch.from_numpy(batch.attention_mask),
        ).last_hidden_state.numpy()
    if pooling == CLS:
        return hidden[:, 0, :]
    weights = batch.attention_mask[:, :, None].astype(np.float32)
    return (hidden * weights).sum(axis=1) / weights.sum(axis=1)


def diagnose(source: str, model: EncoderModel) -> list[tuple[str, float]]:
    """Name every stored tensor that differs from a fresh conversion."""
    from adec.encoder import named_tensors

    named, config, _ = map_source(
        source, pooling=model.config.pooling, max_len=model.config.max_len
    )
    if config != model.config:
        raise ExportError(
            f"checkpoint config {model.config} does not match the source's {config}"
        )
    report = []
    for name, tensor in named_tensors(model.weights):
        diff = float(np.max(np.abs(tensor.data - named[name])))
        if diff > 0.0:
            report.append((name, diff))
    report.sort(key=lambda pair: -pair[1])
    return report


def verify(source: str, checkpoint_path: str, count: int = DEFAULT_PROBES,
           seed: int = 0, threshold: float = DEFAULT_THRESHOLD) -> ParityReport:
    """Compare pooled embeddings of source and checkpoint on probe ids."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    model = load(checkpoint_path)
    batch = probe_id_batch(model.config.vocab_size, model.config.max_len,
                           count=count, seed=seed)
    ours = model.encode_batch(batch).data
    theirs = _source_pooled(source, batch, model.config.pooling)
    if ours.shape != theirs.shape:
        raise ExportError(
            f"pooled shapes differ: checkpoint {ours.shape} vs source {theirs.shape}"
        )
    per_probe = np.max(np.abs(ours - theirs), axis=1)
    worst = float(per_probe.max())
    passed = bool(worst <= threshold)
    report = ParityReport(
        passed=passed,
        max_abs_diff=worst,
        threshold=threshold,
        per_probe=[float(d) for d in per_probe],
        pooling=model.config.pooling,
    )
    if not passed:
        report.mismatched_tensors = [
            (name, diff) for name, diff in diagnose(source, model) if diff > threshold
        ]
    return report
