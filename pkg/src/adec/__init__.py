"""Asymmetric dual-encoder distillation toolkit.

Extract shallow query encoders from a deep dual-encoder teacher, distill
them against the teacher's embeddings, and measure what that trade costs
in retrieval quality versus what it buys in query throughput.
"""

from .encoder import CLS, MEAN, EncoderConfig, EncoderModel, EncoderWeights
from .model_io import LayerScheme, builtin_schemes, extract_layers, fingerprint, load, save
from .distill import MSE, EUCLIDEAN, TrainConfig, TrainHistory, split_queries, train
from .retrieval import DenseIndex, build_index, run_retrieval, search
from .evaluation import MetricsReport, MetricsRow, evaluate_run, load_qrels, ndcg_at_k
from .bench import BenchResult, compare, measure_throughput
from .tokenizer import Vocab, batch_encode, load_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "CLS",
    "MEAN",
    "MSE",
    "EUCLIDEAN",
    "EncoderConfig",
    "EncoderModel",
    "EncoderWeights",
    "LayerScheme",
    "builtin_schemes",
    "extract_layers",
    "fingerprint",
    "load",
    "save",
    "TrainConfig",
    "TrainHistory",
    "split_queries",
    "train",
    "DenseIndex",
    "build_index",
    "run_retrieval",
    "search",
    "MetricsReport",
    "MetricsRow",
    "evaluate_run",
    "load_qrels",
    "ndcg_at_k",
    "BenchResult",
    "compare",
    "measure_throughput",
    "Vocab",
    "batch_encode",
    "load_vocab",
    "tokenize",
    "__version__",
]
