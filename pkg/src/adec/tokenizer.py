"""WordPiece-style tokenization against a plain-text vocabulary.

Deliberately minimal: lowercase, whitespace split, then greedy
longest-match subword lookup with the ``##`` continuation convention.
Words with no match become ``[UNK]`` whole. This is the smallest scheme
that stays compatible with BERT-family vocab files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
_RESERVED = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)
CONTINUATION = "##"


@dataclass(frozen=True)
class Vocab:
    """Immutable token table; ids are dense 0..|V|-1."""

    token_to_id: dict
    id_to_token: tuple

    def __post_init__(self):
        for tok in _RESERVED:
            if tok not in self.token_to_id:
                raise ValueError(f"vocab is missing reserved token {tok}")
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocab contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP_TOKEN]

    @classmethod
    def from_tokens(cls, tokens) -> "Vocab":
        tokens = tuple(tokens)
        return cls(token_to_id={t: i for i, t in enumerate(tokens)}, id_to_token=tokens)


def load_vocab(path) -> Vocab:
    """Read a UTF-8 vocab file, one token per line; line number is the id."""
    with open(path, encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f]
    while tokens and tokens[-1] == "":
        tokens.pop()
    return Vocab.from_tokens(tokens)


def save_vocab(vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for tok in vocab.id_to_token:
            f.write(tok + "\n")


@dataclass
class EncodedBatch:
    """Padded id matrix plus its 0/1 attention mask, both [batch x width]."""

    token_ids: np.ndarray
    attention_mask: np.ndarray

    def __post_init__(self):
        if self.token_ids.shape != self.attention_mask.shape:
            raise ValueError("token_ids and attention_mask shapes differ")

    @property
    def batch_size(self) -> int:
        return self.token_ids.shape[0]

    @property
    def width(self) -> int:
        return self.token_ids.shape[1]


def _wordpiece(word: str, vocab: Vocab) -> list[int]:
    """Greedy longest-match split of one lowercase word; [UNK] on failure."""
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        piece_id = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = CONTINUATION + sub
            if sub in vocab.token_to_id:
                piece_id = vocab.token_to_id[sub]
                break
            end -= 1
        if piece_id is None:
            return [vocab.unk_id]
        pieces.append(piece_id)
        start = end
    return pieces


def tokenize(text: str, vocab: Vocab, max_len: int) -> list[int]:
    """Text to ids: [CLS] + subwords + [SEP], truncated keeping [SEP]."""
    if max_len < 2:
        raise ValueError("max_len must be at least 2 to fit [CLS] and [SEP]")
    ids = [vocab.cls_id]
    for word in text.lower().split():
        ids.extend(_wordpiece(word, vocab))
    ids.append(vocab.sep_id)
    if len(ids) > max_len:
        ids = ids[: max_len - 1] + [vocab.sep_id]
    return ids


def batch_encode(texts, vocab: Vocab, max_len: int) -> EncodedBatch:
    """Tokenize a batch, padding rows to the longest sequence in the batch."""
    if not texts:
        raise ValueError("batch_encode requires at least one text")
    rows = [tokenize(t, vocab, max_len) for t in texts]
    width = max(len(r) for r in rows)
    token_ids = np.full((len(rows), width), vocab.pad_id, dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=np.int64)
    for i, row in enumerate(rows):
        token_ids[i, : len(row)] = row
        mask[i, : len(row)] = 1
    return EncodedBatch(token_ids=token_ids, attention_mask=mask)
