"""Full MGSAG forward pass and multi-task loss for a single document."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .config import TrainConfig
from .corpus import Document, EmbeddingTable
from .encoder import aux_predict, encode_clauses, encode_words, gate_fuse, init_encoder
from .graphs import cgsag_forward, fgsag_forward, init_cgsag, init_fgsag
from .keywords import KeywordSet, TextRankConfig, build_keyword_set
from .pairs import classify_pairs, init_pair_classifier, pair_representations


def build_params(config: TrainConfig, seed: int | None = None) -> ParamStore:
    """Parameters for the configured architecture; disabled parts get no weights."""
    store = ParamStore(config.seed if seed is None else seed)
    d = config.embedding_dim
    init_encoder(store, d, config.word_hidden, config.clause_hidden, aux_heads=config.loss_mode == "full")
    if not config.fgsag_off:
        init_fgsag(store, d)
    if not config.cgsag_off:
        init_cgsag(store, d, config.gat_layers)
    init_pair_classifier(store, d)
    return store


def textrank_config(config: TrainConfig, stopwords=()) -> TextRankConfig:
    return TextRankConfig(
        config.textrank_window,
        config.textrank_damping,
        config.textrank_tol,
        config.textrank_max_iter,
        config.keyword_ratio,
        frozenset(stopwords),
    )


@dataclass
class DocumentInputs:
    """Constant (non-trainable) arrays for one document."""

    doc: Document
    clause_embeddings: list[np.ndarray]
    keywords: tuple[str, ...]
    keyword_features: np.ndarray  # [m, d]
    pair_labels: np.ndarray  # [D, D]
    emotion_labels: np.ndarray  # [D]
    cause_labels: np.ndarray  # [D]


def prepare_document(
    doc: Document,
    embeddings: EmbeddingTable,
    config: TrainConfig,
    keyword_set: KeywordSet | None = None,
    lexicon=(),
    stopwords=(),
) -> DocumentInputs:
    if embeddings.dimension != config.embedding_dim:
        raise ValueError(f"embedding dimension {embeddings.dimension} != config {config.embedding_dim}")
    if any(len(c.tokens) == 0 for c in doc.clauses):
        raise ValueError(f"document {doc.id!r} has an empty clause")
    if keyword_set is None:
        keyword_set = build_keyword_set(doc, lexicon, textrank_config(config, stopwords), config.keyword_mode)
    kws = keyword_set.union
    if config.random_keyword_features:
        feats = np.stack([embeddings.random_vector(t, "rw") for t in kws]) if kws else np.zeros((0, embeddings.dimension))
    else:
        feats = embeddings.lookup(kws)
    n = len(doc)
    pair_labels = np.zeros((n, n), dtype=np.int64)
    for e, c in doc.gold_pairs:
        pair_labels[e - 1, c - 1] = 1
    return DocumentInputs(
        doc,
        [embeddings.lookup(c.tokens) for c in doc.clauses],
        tuple(kws),
        feats,
        pair_labels,
        np.array([int(c.is_emotion) for c in doc.clauses]),
        np.array([int(c.is_cause) for c in doc.clauses]),
    )


@dataclass
class ForwardOutput:
    pair_probs: Tensor  # [D, D, 2]
    y_emotion: Tensor | None  # [D, 2]
    y_cause: Tensor | None
    word_attention: list[Tensor]
    gate: Tensor
    v: Tensor
    v_b: Tensor
    v_c: Tensor
    keyword_attention: Tensor | None
    clause_attention: list[Tensor]


def forward(
    store: ParamStore,
    inputs: DocumentInputs,
    config: TrainConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardOutput:
    pooled, word_attn = [], []
    for emb in inputs.clause_embeddings:
        h_i, alpha = encode_words(store, emb)
        pooled.append(h_i)
        word_attn.append(alpha)
    h = ad.stack(pooled, axis=0)
    u_e, u_c = encode_clauses(store, h)
    g, v = gate_fuse(store, u_e, u_c)
    y_e = y_c = None
    if config.loss_mode == "full":
        y_e, y_c = aux_predict(store, u_e, u_c)

    drop = config.dropout_rate
    k_attn = None
    if config.fgsag_off:
        v_b = v
    else:
        X_k = ad.Tensor(inputs.keyword_features) if len(inputs.keywords) else None
        v_b, k_attn = fgsag_forward(store, v, X_k, config.fgsag_norm, drop, rng, training, inputs.doc.id)
    c_attn: list[Tensor] = []
    if config.cgsag_off:
        v_c = v
    else:
        v_c, c_attn = cgsag_forward(store, v, config.gat_layers, config.leaky_slope, drop, rng, training)

    probs = classify_pairs(store, pair_representations(v_b, v_c))
    return ForwardOutput(probs, y_e, y_c, word_attn, g, v, v_b, v_c, k_attn, c_attn)


def total_loss(
    pair_probs: Tensor,
    aux_probs: tuple[Tensor, Tensor] | None,
    pair_labels: np.ndarray,
    emotion_labels: np.ndarray | None = None,
    cause_labels: np.ndarray | None = None,
    loss_mode: str = "full",
) -> tuple[Tensor, dict[str, float]]:
    """L = L_pair + L_emo + L_cau (``loss_mode="pair"`` keeps only L_pair).

    L_pair averages cross-entropy over all |D|^2 candidates, the auxiliary
    terms over the |D| clauses.
    """
    n = pair_probs.shape[0]
    l_pair = ad.cross_entropy(ad.reshape(pair_probs, (n * n, 2)), np.asarray(pair_labels).reshape(-1))
    parts = {"pair": l_pair.item()}
    if loss_mode == "pair":
        return l_pair, parts
    if aux_probs is None:
        raise ValueError("full loss needs auxiliary predictions")
    l_emo = ad.cross_entropy(aux_probs[0], np.asarray(emotion_labels))
    l_cau = ad.cross_entropy(aux_probs[1], np.asarray(cause_labels))
    parts["emo"] = l_emo.item()
    parts["cau"] = l_cau.item()
    return ad.add(ad.add(l_pair, l_emo), l_cau), parts


def document_loss(store, inputs, config, training=False, rng=None) -> tuple[Tensor, dict[str, float]]:
    out = forward(store, inputs, config, training, rng)
    aux = None if out.y_emotion is None else (out.y_emotion, out.y_cause)
    return total_loss(
        out.pair_probs, aux, inputs.pair_labels, inputs.emotion_labels, inputs.cause_labels, config.loss_mode
    )


def corpus_loss(store, inputs_list, config) -> Tensor:
    """Deterministic (eval-mode) summed loss over several documents."""
    total = None
    for inp in inputs_list:
        loss, _ = document_loss(store, inp, config, training=False)
        total = loss if total is None else ad.add(total, loss)
    return total
