"""Clause-keyword bipartite attention (fine-grained) and clause graph attention (coarse-grained)."""
from __future__ import annotations

import json
import logging

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor

log = logging.getLogger(__name__)

FGSAG_NORMS = ("over_clauses", "over_keywords")


def init_fgsag(store: ParamStore, dim: int) -> None:
    store.matrix("fgsag.W_1", (dim, dim))
    store.matrix("fgsag.W_2", (dim, dim))
    store.matrix("fgsag.W_3", (dim, dim))
    store.matrix("fgsag.w", (2 * dim,), fan=(2 * dim, 1))
    store.bias("fgsag.b", (dim,))


def init_cgsag(store: ParamStore, dim: int, layers: int = 2) -> None:
    for t in range(1, layers + 1):
        p = f"cgsag.layer{t}"
        store.matrix(f"{p}.W_1", (dim, dim))
        store.matrix(f"{p}.W_2", (dim, dim))
        store.matrix(f"{p}.W_3", (dim, dim))
        store.matrix(f"{p}.w", (2 * dim,), fan=(2 * dim, 1))
        store.bias(f"{p}.b", (dim,))


def fgsag_attention(store: ParamStore, X_c: Tensor, X_k: Tensor, norm: str = "over_clauses") -> Tensor:
    """Clause-keyword attention alpha [|D|, m].

    The score is w^T [W_1 v_i; W_2 k_j]. With ``norm="over_clauses"`` each
    keyword column is a softmax over clauses; ``"over_keywords"`` normalises
    each clause row over keywords instead.
    """
    if norm not in FGSAG_NORMS:
        raise ValueError(f"fgsag norm must be one of {FGSAG_NORMS}")
    dim = X_c.shape[1]
    w = store["fgsag.w"]
    clause_part = ad.matmul(ad.matmul(X_c, ad.transpose(store["fgsag.W_1"])), w[:dim])  # [|D|]
    keyword_part = ad.matmul(ad.matmul(X_k, ad.transpose(store["fgsag.W_2"])), w[dim:])  # [m]
    scores = ad.add(ad.reshape(clause_part, (-1, 1)), ad.reshape(keyword_part, (1, -1)))
    return ad.softmax(scores, axis=0 if norm == "over_clauses" else 1)


def fgsag_update(store: ParamStore, X_c: Tensor, alpha: Tensor | None) -> Tensor:
    """v^b_i = tanh(v_i + sum_j alpha_ij * ktilde_j + b), ktilde_j = sum_t alpha_tj W_3 v_t.

    ``alpha=None`` (no keywords) leaves the keyword sum empty.
    """
    b = store["fgsag.b"]
    if alpha is None or alpha.shape[1] == 0:
        return ad.tanh(ad.add(X_c, b))
    projected = ad.matmul(X_c, ad.transpose(store["fgsag.W_3"]))  # rows W_3 v_t
    k_tilde = ad.matmul(ad.transpose(alpha), projected)  # [m, dim]
    return ad.tanh(ad.add(ad.add(X_c, ad.matmul(alpha, k_tilde)), b))


def fgsag_forward(store, X_c, X_k, norm="over_clauses", dropout=0.0, rng=None, training=False, doc_id=None):
    if X_k is None or X_k.shape[0] == 0:
        log.debug("document %s has no keywords; FGSAG reduces to tanh(v + b)", doc_id)
        alpha = None
    else:
        alpha = fgsag_attention(store, X_c, X_k, norm)
    out = fgsag_update(store, X_c, alpha)
    return ad.dropout(out, dropout, rng, training), alpha


def gat_layer(store: ParamStore, v: Tensor, layer: int, slope: float = 0.2) -> tuple[Tensor, Tensor]:
    """One fully connected (self-loops included) graph attention layer.

    e_ij = w^T tanh([W_2 v_i; W_3 v_j]); alpha = row softmax of LeakyReLU(e);
    out_i = ReLU(sum_j alpha_ij W_1 v_j + b).
    """
    p = f"cgsag.layer{layer}"
    dim = v.shape[1]
    w = store[f"{p}.w"]
    src = ad.matmul(ad.tanh(ad.matmul(v, ad.transpose(store[f"{p}.W_2"]))), w[:dim])  # [|D|]
    dst = ad.matmul(ad.tanh(ad.matmul(v, ad.transpose(store[f"{p}.W_3"]))), w[dim:])  # [|D|]
    e = ad.add(ad.reshape(src, (-1, 1)), ad.reshape(dst, (1, -1)))
    alpha = ad.softmax(ad.leaky_relu(e, slope), axis=1)
    msg = ad.matmul(v, ad.transpose(store[f"{p}.W_1"]))
    return ad.relu(ad.add(ad.matmul(alpha, msg), store[f"{p}.b"])), alpha


def cgsag_forward(store, v, layers=2, slope=0.2, dropout=0.0, rng=None, training=False):
    attn = []
    for t in range(1, layers + 1):
        v, alpha = gat_layer(store, v, t, slope)
        v = ad.dropout(v, dropout, rng, training)
        attn.append(alpha)
    return v, attn


def attention_json(doc_id: str, keywords, alpha) -> str:
    """Keyword-clause attention for heatmaps: {"doc_id", "keywords", "alpha"}."""
    mat = [] if alpha is None else np.asarray(alpha.data if isinstance(alpha, Tensor) else alpha).tolist()
    return json.dumps({"doc_id": doc_id, "keywords": list(keywords), "alpha": mat}, ensure_ascii=False)
