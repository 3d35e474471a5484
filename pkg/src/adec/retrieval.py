"""Brute-force dense index with dot-product top-k search.

This is the asymmetric deployment surface: the index is built once with
the expensive document encoder, queries are embedded by whichever encoder
is being measured. Search is exhaustive on purpose; at desk scale an
exact ranking keeps evaluation free of ANN noise. Ties break by ascending
doc id so runs are reproducible everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import model_io
from .encoder import EncoderModel

Run = dict  # query id -> list of (doc_id, score), descending score


@dataclass
class DenseIndex:
    doc_ids: list[str]
    embeddings: np.ndarray  # [n_docs x d], float32
    fingerprint: str

    def __post_init__(self):
        if len(self.doc_ids) != self.embeddings.shape[0]:
            raise ValueError("doc_ids and embeddings row count differ")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("duplicate document ids")

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def build_index(corpus, encoder: EncoderModel) -> DenseIndex:
    """Embed (doc_id, text) pairs; records the builder's checkpoint hash."""
    corpus = list(corpus)
    doc_ids = [doc_id for doc_id, _ in corpus]
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("corpus contains duplicate ids")
    embeddings = encoder.encode([text for _, text in corpus])
    return DenseIndex(
        doc_ids=doc_ids,
        embeddings=embeddings,
        fingerprint=model_io.fingerprint(encoder),
    )


def search(index: DenseIndex, query_embedding: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-k documents by dot product; ties by ascending doc id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_embedding, dtype=np.float32)
    if q.shape != (index.dim,):
        raise ValueError(f"query dimension {q.shape} does not match index dim {index.dim}")
    if not index.doc_ids:
        return []
    scores = index.embeddings @ q  # float32 throughout
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], index.doc_ids[i]))
    return [(index.doc_ids[i], float(scores[i])) for i in order[:k]]


def run_retrieval(queries, index: DenseIndex, query_encoder: EncoderModel, k: int = 10) -> Run:
    """One ranked list per (query_id, text); deterministic given the inputs."""
    queries = list(queries)
    qids = [qid for qid, _ in queries]
    if len(set(qids)) != len(qids):
        raise ValueError("duplicate query ids")
    embeddings = query_encoder.encode([text for _, text in queries])
    return {qid: search(index, embeddings[i], k) for i, (qid, _) in enumerate(queries)}


def save_index(index: DenseIndex, path) -> None:
    np.savez(
        path,
        doc_ids=np.array(index.doc_ids, dtype=object),
        embeddings=index.embeddings,
        fingerprint=np.array(index.fingerprint),
    )


def load_index(path) -> DenseIndex:
    data = np.load(path, allow_pickle=True)
    return DenseIndex(
        doc_ids=[str(d) for d in data["doc_ids"]],
        embeddings=data["embeddings"].astype(np.float32),
        fingerprint=str(data["fingerprint"]),
    )


def load_corpus(path) -> list[tuple[str, str]]:
    """JSON-lines {"_id", "text", optional "title"}; title prefixes the text."""
    docs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            text = row["text"]
            title = row.get("title", "")
            docs.append((str(row["_id"]), f"{title} {text}" if title else text))
    return docs


def load_query_file(path) -> list[tuple[str, str]]:
    """JSON-lines {"_id", "text"} or plain text (ids generated by line)."""
    queries = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                row = json.loads(line)
                queries.append((str(row["_id"]), row["text"]))
            else:
                queries.append((f"q{n:06d}", line))
    return queries


def write_trec_run(run: Run, path, runtag: str = "adec") -> None:
    """TREC format: qid Q0 docid rank score runtag."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in run:
            for rank, (doc_id, score) in enumerate(run[qid], start=1):
                f.write(f"{qid} Q0 {doc_id} {rank} {score!r} {runtag}\n")


def read_trec_run(path) -> Run:
    """Inverse of write_trec_run; rows must arrive rank-ordered per query."""
    run: Run = {}
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError(f"line {n + 1}: expected 6 fields, got {len(fields)}")
            qid, _, doc_id, rank, score, _ = fields
            rows = run.setdefault(qid, [])
            if int(rank) != len(rows) + 1:
                raise ValueError(f"line {n + 1}: rank {rank} out of order for {qid}")
            rows.append((doc_id, float(score)))
    return run
