"""scikit-learn style wrapper: ``MGSAG().fit(docs).predict(docs)``."""
from __future__ import annotations

import json
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import autodiff as ad
from .config import TrainConfig
from .corpus import Document, EmbeddingTable
from .graphs import attention_json
from .model import build_params, forward
from .pairs import ExtractionResult
from .training import Resources, evaluate_documents, predict_inputs, train_fold

CONFIG_KEY = "__config__"


def check_documents(docs, require_pairs: bool = False) -> list[Document]:
    """Validate estimator input: a non-empty sequence of :class:`Document`."""
    if isinstance(docs, Document):
        raise TypeError("expected a sequence of Document, got a single Document")
    docs = list(docs)
    if not docs:
        raise ValueError("no documents given")
    for d in docs:
        if not isinstance(d, Document):
            raise TypeError(f"expected Document, got {type(d).__name__}")
        if len(d) == 0:
            raise ValueError(f"document {d.id!r} has no clauses")
        if require_pairs and not d.gold_pairs:
            raise ValueError(f"training document {d.id!r} has no gold pairs")
    return docs


def save_params(path, store: ad.ParamStore, config: TrainConfig) -> None:
    arrays = store.state_dict()
    arrays[CONFIG_KEY] = np.array(json.dumps(config.to_dict(), sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_params(path) -> tuple[ad.ParamStore, TrainConfig]:
    with np.load(path, allow_pickle=False) as z:
        config = TrainConfig.from_dict(json.loads(str(z[CONFIG_KEY])))
        state = {k: z[k] for k in z.files if k != CONFIG_KEY}
    store = build_params(config)
    store.load_state_dict(state)
    return store, config


class MGSAG(BaseEstimator):
    """Multi-granularity semantic aware graph model for emotion-cause pair extraction.

    ``X`` is a list of :class:`~mgsag.corpus.Document`; gold pairs on the
    training documents are the targets, so ``fit`` ignores ``y``.
    """

    def __init__(
        self,
        embeddings=None,
        lexicon=(),
        stopwords=(),
        epochs=30,
        learning_rate=1e-3,
        seed=0,
        loss_mode="full",
        dropout_rate=0.1,
        embedding_dim=200,
        word_hidden=200,
        clause_hidden=100,
        gat_layers=2,
        leaky_slope=0.2,
        fgsag_off=False,
        cgsag_off=False,
        keyword_mode="cw",
        random_keyword_features=False,
        fgsag_norm="over_clauses",
        textrank_window=2,
        textrank_damping=0.85,
        textrank_tol=1e-6,
        textrank_max_iter=100,
        keyword_ratio=1 / 3,
    ):
        self.embeddings = embeddings
        self.lexicon = lexicon
        self.stopwords = stopwords
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.loss_mode = loss_mode
        self.dropout_rate = dropout_rate
        self.embedding_dim = embedding_dim
        self.word_hidden = word_hidden
        self.clause_hidden = clause_hidden
        self.gat_layers = gat_layers
        self.leaky_slope = leaky_slope
        self.fgsag_off = fgsag_off
        self.cgsag_off = cgsag_off
        self.keyword_mode = keyword_mode
        self.random_keyword_features = random_keyword_features
        self.fgsag_norm = fgsag_norm
        self.textrank_window = textrank_window
        self.textrank_damping = textrank_damping
        self.textrank_tol = textrank_tol
        self.textrank_max_iter = textrank_max_iter
        self.keyword_ratio = keyword_ratio

    def _make_config(self) -> TrainConfig:
        params = self.get_params(deep=False)
        for key in ("embeddings", "lexicon", "stopwords"):
            params.pop(key)
        return TrainConfig(**params)

    def _make_resources(self, config: TrainConfig) -> Resources:
        emb = self.embeddings
        if emb is None:
            emb = EmbeddingTable(config.embedding_dim, seed=config.seed)
        return Resources(emb, frozenset(self.lexicon), frozenset(self.stopwords))

    def fit(self, X: Sequence[Document], y=None, on_epoch=None):
        docs = check_documents(X, require_pairs=True)
        self.config_ = self._make_config()
        self.resources_ = self._make_resources(self.config_)
        self.params_, self.loss_trace_ = train_fold(docs, self.config_, self.resources_, on_epoch=on_epoch)
        self.n_params_ = self.params_.n_params()
        return self

    def _inputs(self, X):
        check_is_fitted(self, "params_")
        docs = check_documents(X)
        return docs, self.resources_.prepare(docs, self.config_)

    def predict(self, X) -> list[ExtractionResult]:
        _, inputs = self._inputs(X)
        return [predict_inputs(self.params_, inp, self.config_)[0] for inp in inputs]

    def predict_proba(self, X) -> list[np.ndarray]:
        """Per document, the [|D|, |D|, 2] candidate-pair probabilities."""
        _, inputs = self._inputs(X)
        return [predict_inputs(self.params_, inp, self.config_)[1] for inp in inputs]

    def score(self, X, y=None) -> float:
        """Pair-level F1 over ``X``."""
        docs, inputs = self._inputs(X)
        counts, _ = evaluate_documents(self.params_, docs, self.config_, self.resources_, inputs)
        return counts["all"]["ECPE"].metrics()["f1"]

    def keyword_attention(self, X) -> list[dict]:
        """Clause-keyword attention matrices for heatmaps; empty when FGSAG is off."""
        docs, inputs = self._inputs(X)
        out = []
        for doc, inp in zip(docs, inputs):
            with ad.no_grad():
                fw = forward(self.params_, inp, self.config_)
            out.append(json.loads(attention_json(doc.id, inp.keywords, fw.keyword_attention)))
        return out

    def save(self, path) -> None:
        check_is_fitted(self, "params_")
        save_params(path, self.params_, self.config_)

    @classmethod
    def load(cls, path, embeddings=None, lexicon=(), stopwords=()) -> "MGSAG":
        store, config = load_params(path)
        params = config.to_dict()
        for key in ("folds", "repeats"):
            params.pop(key)
        est = cls(embeddings=embeddings, lexicon=lexicon, stopwords=stopwords, **params)
        est.config_ = config
        est.resources_ = est._make_resources(config)
        est.params_ = store
        est.loss_trace_ = []
        est.n_params_ = store.n_params()
        return est
