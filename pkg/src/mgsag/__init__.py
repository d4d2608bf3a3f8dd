"""Emotion-cause pair extraction with fine- and coarse-grained semantic graphs."""
from .config import TrainConfig
from .corpus import Document, EmbeddingTable, generate_synthetic_corpus, load_corpus, make_folds, save_corpus
from .estimator import MGSAG, check_documents
from .keywords import KeywordExtractor, build_keyword_set, coverage_stats
from .training import compute_prf, cross_validate, distance_histogram, split_bias, train_fold

__all__ = [
    "MGSAG",
    "Document",
    "EmbeddingTable",
    "KeywordExtractor",
    "TrainConfig",
    "build_keyword_set",
    "check_documents",
    "compute_prf",
    "coverage_stats",
    "cross_validate",
    "distance_histogram",
    "generate_synthetic_corpus",
    "load_corpus",
    "make_folds",
    "save_corpus",
    "split_bias",
    "train_fold",
]
