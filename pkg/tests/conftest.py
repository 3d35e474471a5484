import numpy as np
import pytest

from adec import toydata
from adec.encoder import MEAN, EncoderConfig, EncoderModel, init_random
from adec.tokenizer import CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN, Vocab


@pytest.fixture
def tiny_vocab():
    return Vocab.from_tokens(
        [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN]
        + ["alpha", "beta", "gamma", "delta", "epsilon"]
    )


@pytest.fixture
def tiny_model(tiny_vocab):
    """2-layer, hidden-8 encoder with random weights; cheap enough for any test."""
    config = EncoderConfig(
        num_layers=2,
        hidden_dim=8,
        num_heads=2,
        ff_dim=16,
        max_len=16,
        vocab_size=len(tiny_vocab),
        pooling=MEAN,
    )
    return EncoderModel(
        config=config,
        weights=init_random(config, seed=7),
        vocab=tiny_vocab,
        provenance={"model_id": "tiny-test"},
    )


@pytest.fixture(scope="session")
def toy_dataset():
    return toydata.generate(seed=13)


@pytest.fixture(scope="session")
def toy_teacher(toy_dataset):
    """The 6-layer teacher used by the distillation and benchmark tests.

    Trained once per session; downstream tests must not mutate it.
    """
    return toydata.train_toy_teacher(toy_dataset, seed=0, epochs=6)


def random_texts(vocab: Vocab, rng: np.random.Generator, n: int, max_words: int = 8):
    """Random whitespace texts over a vocabulary's non-special tokens."""
    words = [t for t in vocab.id_to_token if not t.startswith("[") and not t.startswith("##")]
    texts = []
    for _ in range(n):
        k = int(rng.integers(1, max_words + 1))
        texts.append(" ".join(rng.choice(words, size=k)))
    return texts
