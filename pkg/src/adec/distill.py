"""Unsupervised embedding alignment of a student against a frozen teacher.

The student query encoder is trained so its pooled embeddings match the
teacher's on a query sample: squared error by default, plain Euclidean
distance as the alternative objective. The two differ only in gradient
shape; both are exposed because the distance actually monitored during
validation is the Euclidean one.

Teacher embeddings are precomputed once per run (the teacher is frozen,
so they are constants) and queries are shuffled per epoch with the run
seed, which makes training bitwise reproducible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .encoder import EncoderModel, parameters
from .numerics import GradTape, Tensor
from .tokenizer import batch_encode

MSE = "mse"
EUCLIDEAN = "euclidean"
_LOSS_KINDS = (MSE, EUCLIDEAN)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-4
    warmup_steps: int = 1000
    epochs: int = 1
    loss_kind: str = MSE
    weight_decay: float = 0.01
    seed: int = 0
    val_fraction: float = 0.2
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.loss_kind not in _LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {_LOSS_KINDS}")


@dataclass
class TrainHistory:
    steps: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)
    val_steps: list[int] = field(default_factory=list)
    val_distances: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)

    def record_step(self, step: int, loss: float, lr: float) -> None:
        if self.steps and step <= self.steps[-1]:
            raise ValueError("step indices must be strictly increasing")
        self.steps.append(step)
        self.losses.append(loss)
        self.lrs.append(lr)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("step,loss,lr\n")
            for step, loss, lr in zip(self.steps, self.losses, self.lrs):
                f.write(f"{step},{loss!r},{lr!r}\n")


def split_queries(queries, val_fraction: float = 0.2):
    """Leading ceil((1 - val_fraction) * n) queries train, the rest validate.

    No shuffling before the split; order is preserved within each part.
    """
    queries = list(queries)
    if not queries:
        raise ValueError("cannot split an empty query list")
    cut = math.ceil((1.0 - val_fraction) * len(queries))
    return queries[:cut], queries[cut:]


def alignment_loss(student_embs: Tensor, teacher_embs: Tensor, kind: str = MSE) -> Tensor:
    """Scalar alignment objective over a [batch x dim] embedding pair."""
    if student_embs.shape != teacher_embs.shape:
        raise nm.ShapeError(
            f"embedding shapes differ: {student_embs.shape} vs {teacher_embs.shape}"
        )
    diff = nm.sub(student_embs, teacher_embs)
    if kind == MSE:
        return nm.tensor_mean(nm.mul(diff, diff))
    if kind == EUCLIDEAN:
        return nm.tensor_mean(nm.rows_norm(diff))
    raise ValueError(f"unknown loss kind {kind!r}")


def lr_at(step: int, config: TrainConfig) -> float:
    """Linear warmup from 0 over warmup_steps, constant afterwards."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if config.warmup_steps == 0 or step >= config.warmup_steps:
        return config.learning_rate
    return config.learning_rate * step / config.warmup_steps


def init_adam_state(params: list[Tensor]) -> dict:
    return {
        "step": 0,
        "m": [np.zeros_like(p.data) for p in params],
        "v": [np.zeros_like(p.data) for p in params],
    }


def adamw_step(
    params: list[Tensor],
    grads: list[np.ndarray],
    state: dict,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One AdamW update in place: decoupled decay, then bias-corrected Adam."""
    if len(params) != len(grads):
        raise ValueError("params and grads length mismatch")
    b1, b2 = betas
    t = state["step"] + 1
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if g.shape != p.data.shape:
            raise nm.ShapeError(f"grad shape {g.shape} != param shape {p.data.shape}")
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    state["step"] = t


def _check_compatible(teacher: EncoderModel, student: EncoderModel) -> None:
    if teacher.config.hidden_dim != student.config.hidden_dim:
        raise ValueError(
            f"hidden_dim mismatch: teacher {teacher.config.hidden_dim}, "
            f"student {student.config.hidden_dim}"
        )
    if teacher.config.pooling != student.config.pooling:
        raise ValueError("teacher and student use different pooling strategies")
    if teacher.vocab.token_to_id != student.vocab.token_to_id:
        raise ValueError("teacher and student vocabularies differ")


def validate(teacher: EncoderModel, student: EncoderModel, val_queries) -> float:
    """Mean Euclidean distance between the encoders on held-out queries."""
    val_queries = list(val_queries)
    if not val_queries:
        raise ValueError("validation query set is empty")
    _check_compatible(teacher, student)
    s = student.encode(val_queries)
    t = teacher.encode(val_queries)
    distances = np.sqrt(((s - t) ** 2).sum(axis=1))
    return float(np.mean(distances, dtype=np.float64))


def train(
    teacher: EncoderModel,
    student: EncoderModel,
    queries,
    config: TrainConfig,
) -> tuple[EncoderModel, TrainHistory]:
    """Distill the student toward the teacher's query embeddings.

    The teacher is never touched: its embeddings are computed without
    gradient tracking, once, before the loop. History carries every step
    plus a validation distance before training and after each epoch.
    """
    _check_compatible(teacher, student)
    queries = list(queries)
    train_queries, val_queries = split_queries(queries, config.val_fraction)
    if not train_queries:
        raise ValueError("no training queries after split")

    teacher_train = teacher.encode(train_queries)
    params = parameters(student.weights)
    for p in params:
        p.requires_grad = True
    state = init_adam_state(params)
    history = TrainHistory()
    rng = np.random.default_rng(config.seed)

    if val_queries:
        history.val_steps.append(0)
        history.val_distances.append(validate(teacher, student, val_queries))

    step = 0
    try:
        for _ in range(config.epochs):
            t0 = time.perf_counter()
            order = rng.permutation(len(train_queries))
            for start in range(0, len(order), config.batch_size):
                idx = order[start : start + config.batch_size]
                texts = [train_queries[i] for i in idx]
                target = Tensor(teacher_train[idx])
                batch = batch_encode(texts, student.vocab, student.config.max_len)
                with GradTape():
                    embs = student.encode_batch(batch)
                    loss = alignment_loss(embs, target, config.loss_kind)
                    nm.backward(loss)
                lr = lr_at(step, config)
                adamw_step(
                    params,
                    [p.grad for p in params],
                    state,
                    lr,
                    config.betas,
                    config.eps,
                    config.weight_decay,
                )
                history.record_step(step, loss.item(), lr)
                step += 1
            history.epoch_seconds.append(time.perf_counter() - t0)
            if val_queries:
                history.val_steps.append(step)
                history.val_distances.append(validate(teacher, student, val_queries))
    finally:
        for p in params:
            p.requires_grad = False
            p.grad = None
    return student, history


def load_queries(path) -> list[str]:
    """Query file: JSON-lines with {"_id", "text"} or plain one-per-line text."""
    texts = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                row = json.loads(line)
                texts.append(row["text"])
            else:
                texts.append(line)
    return texts
