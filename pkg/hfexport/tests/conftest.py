import numpy as np
import pytest
import torch
from transformers import BertConfig, BertModel


def make_bert_dir(path, num_layers=2, hidden=32, heads=4, ff=48,
                  max_positions=40, vocab_size=64, seed=11):
    """Save a small randomly initialized BERT plus a wordpiece vocab."""
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=vocab_size,
        hidden_size=hidden,
        num_hidden_layers=num_layers,
        num_attention_heads=heads,
        intermediate_size=ff,
        max_position_embeddings=max_positions,
        hidden_act="gelu",
    )
    model = BertModel(config).eval()
    model.save_pretrained(path)
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    tokens += [f"tok{i}" for i in range(vocab_size - len(tokens))]
    with open(path / "vocab.txt", "w", encoding="utf-8") as f:
        f.write("\n".join(tokens) + "\n")
    return path


@pytest.fixture(scope="session")
def bert_dir(tmp_path_factory):
    return make_bert_dir(tmp_path_factory.mktemp("bert2"), num_layers=2)


@pytest.fixture(scope="session")
def bert12_dir(tmp_path_factory):
    """A 12-layer source, sized for the full layer-scheme catalogue."""
    return make_bert_dir(tmp_path_factory.mktemp("bert12"), num_layers=12, seed=3)


@pytest.fixture(scope="session")
def numpy_state(bert_dir):
    model = BertModel.from_pretrained(bert_dir).eval()
    return {k: v.numpy() for k, v in model.state_dict().items()}


def sample_texts():
    return ["tok3 tok7 tok1", "tok20 tok20 tok41 tok5", "tok0"]
