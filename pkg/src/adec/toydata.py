"""Desk-scale synthetic retrieval world and its teacher.

The dataset is a topic model over pseudo-words: every document draws most
of its words from one topic, every query paraphrases one document. Qrels
grade the paraphrased document 2 and its topic mates 1, so nDCG has ties
and graded relevance to chew on. A separate, larger unlabeled query file
drives distillation, mirroring the train-queries / eval-queries split of
real retrieval benchmarks.

The teacher is the same encoder architecture trained siamese-style with
an in-batch softmax contrastive loss over (query, document) pairs, which
is enough signal at this scale to make retrieval quality meaningful.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .distill import adamw_step, init_adam_state
from .encoder import MEAN, EncoderConfig, EncoderModel, init_random, parameters
from .numerics import GradTape, Tensor
from .tokenizer import CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN, Vocab, batch_encode

TEACHER_LAYERS = 6
TEACHER_HIDDEN = 64
TEACHER_HEADS = 4
TEACHER_FF = 256
TEACHER_MAX_LEN = 64

_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]


def _make_word(rng: np.random.Generator) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(3))


@dataclass
class ToyDataset:
    corpus: list  # (doc_id, text)
    eval_queries: list  # (query_id, text)
    qrels: dict  # query_id -> {doc_id: grade}
    train_queries: list  # unlabeled texts for distillation
    vocab: Vocab


def generate(
    seed: int = 13,
    n_topics: int = 40,
    n_docs: int = 200,
    n_eval_queries: int = 100,
    n_train_queries: int = 1000,
    words_per_topic: int = 8,
) -> ToyDataset:
    rng = np.random.default_rng(seed)

    words = set()
    while len(words) < n_topics * words_per_topic + 30:
        words.add(_make_word(rng))
    words = sorted(words)
    rng.shuffle(words)
    topics = [
        words[i * words_per_topic : (i + 1) * words_per_topic] for i in range(n_topics)
    ]
    fillers = words[n_topics * words_per_topic :]

    doc_words: list[list[str]] = []
    doc_topic: list[int] = []
    corpus = []
    for d in range(n_docs):
        topic = d % n_topics
        length = int(rng.integers(10, 15))
        body = list(rng.choice(topics[topic], size=length)) + list(
            rng.choice(fillers, size=2)
        )
        rng.shuffle(body)
        doc_words.append(body)
        doc_topic.append(topic)
        corpus.append((f"d{d:04d}", " ".join(body)))

    def make_query(doc: int) -> str:
        n = int(rng.integers(3, 6))
        return " ".join(rng.choice(doc_words[doc], size=n))

    eval_queries = []
    qrels: dict = {}
    for q in range(n_eval_queries):
        doc = int(rng.integers(0, n_docs))
        qid = f"q{q:04d}"
        eval_queries.append((qid, make_query(doc)))
        grades = {
            corpus[other][0]: 1
            for other in range(n_docs)
            if doc_topic[other] == doc_topic[doc] and other != doc
        }
        grades[corpus[doc][0]] = 2
        qrels[qid] = grades

    train_queries = [make_query(int(rng.integers(0, n_docs))) for _ in range(n_train_queries)]

    vocab = Vocab.from_tokens([PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN] + words)
    return ToyDataset(
        corpus=corpus,
        eval_queries=eval_queries,
        qrels=qrels,
        train_queries=train_queries,
        vocab=vocab,
    )


def write_dataset(dataset: ToyDataset, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "corpus.jsonl"), "w", encoding="utf-8") as f:
        for doc_id, text in dataset.corpus:
            f.write(json.dumps({"_id": doc_id, "text": text}) + "\n")
    with open(os.path.join(out_dir, "queries.jsonl"), "w", encoding="utf-8") as f:
        for qid, text in dataset.eval_queries:
            f.write(json.dumps({"_id": qid, "text": text}) + "\n")
    with open(os.path.join(out_dir, "qrels.tsv"), "w", encoding="utf-8") as f:
        f.write("query-id\tcorpus-id\tscore\n")
        for qid in sorted(dataset.qrels):
            for doc_id in sorted(dataset.qrels[qid]):
                f.write(f"{qid}\t{doc_id}\t{dataset.qrels[qid][doc_id]}\n")
    with open(os.path.join(out_dir, "train_queries.jsonl"), "w", encoding="utf-8") as f:
        for i, text in enumerate(dataset.train_queries):
            f.write(json.dumps({"_id": f"tq{i:06d}", "text": text}) + "\n")
    with open(os.path.join(out_dir, "vocab.txt"), "w", encoding="utf-8") as f:
        for tok in dataset.vocab.id_to_token:
            f.write(tok + "\n")


def _contrastive_loss(query_embs: Tensor, doc_embs: Tensor) -> Tensor:
    """In-batch softmax cross entropy; pair i's document is the target."""
    b, d = query_embs.shape
    scores = nm.scale(nm.matmul(query_embs, nm.transpose(doc_embs, (1, 0))), 1.0 / np.sqrt(d))
    probs = nm.softmax(scores, axis=-1)
    eye = Tensor(np.eye(b, dtype=np.float32))
    diag = nm.tensor_sum(nm.mul(probs, eye), axis=1)
    return nm.scale(nm.tensor_mean(nm.log(diag)), -1.0)


def train_toy_teacher(
    dataset: ToyDataset,
    seed: int = 0,
    epochs: int = 6,
    batch_size: int = 32,
    learning_rate: float = 1e-3,
    queries_per_doc: int = 4,
) -> EncoderModel:
    """Fit a siamese dual encoder on synthetic (query, document) pairs."""
    rng = np.random.default_rng(seed)
    config = EncoderConfig(
        num_layers=TEACHER_LAYERS,
        hidden_dim=TEACHER_HIDDEN,
        num_heads=TEACHER_HEADS,
        ff_dim=TEACHER_FF,
        max_len=TEACHER_MAX_LEN,
        vocab_size=len(dataset.vocab),
        pooling=MEAN,
    )
    model = EncoderModel(
        config=config,
        weights=init_random(config, seed),
        vocab=dataset.vocab,
        provenance={"model_id": f"toy-teacher-seed{seed}"},
    )

    doc_texts = [text for _, text in dataset.corpus]
    pairs = []
    for doc_idx, text in enumerate(doc_texts):
        words = text.split()
        for _ in range(queries_per_doc):
            n = int(rng.integers(3, 6))
            pairs.append((" ".join(rng.choice(words, size=n)), text))

    params = parameters(model.weights)
    for p in params:
        p.requires_grad = True
    state = init_adam_state(params)
    step = 0
    try:
        for _ in range(epochs):
            order = rng.permutation(len(pairs))
            for start in range(0, len(order) - batch_size + 1, batch_size):
                idx = order[start : start + batch_size]
                q_batch = batch_encode(
                    [pairs[i][0] for i in idx], dataset.vocab, config.max_len
                )
                d_batch = batch_encode(
                    [pairs[i][1] for i in idx], dataset.vocab, config.max_len
                )
                with GradTape():
                    q_embs = model.encode_batch(q_batch)
                    d_embs = model.encode_batch(d_batch)
                    loss = _contrastive_loss(q_embs, d_embs)
                    nm.backward(loss)
                warm = min(1.0, (step + 1) / 20.0)
                adamw_step(
                    params,
                    [p.grad for p in params],
                    state,
                    lr=learning_rate * warm,
                    weight_decay=0.01,
                )
                step += 1
    finally:
        for p in params:
            p.requires_grad = False
            p.grad = None
    return model
