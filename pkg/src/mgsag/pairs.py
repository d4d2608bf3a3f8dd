"""Candidate pair construction, pair classification and clause-level derivation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor


def init_pair_classifier(store: ParamStore, dim: int) -> None:
    store.matrix("pair.W_p", (4 * dim, 2), fan=(4 * dim, 2))
    store.bias("pair.b_p", (2,))


def pair_representations(v_b: Tensor, v_c: Tensor) -> Tensor:
    """All |D|^2 ordered pairs: v^p_ij = [v_hat_i; v_hat_j], v_hat_i = [v^b_i; v^c_i]."""
    if v_b.shape != v_c.shape or v_b.ndim != 2:
        raise ad.ShapeError("pair_representations", v_b.shape, v_c.shape)
    v_hat = ad.concat([v_b, v_c], axis=1)  # [D, 2d]
    n = v_hat.shape[0]
    rows = np.repeat(np.arange(n), n)
    cols = np.tile(np.arange(n), n)
    flat = ad.concat([v_hat[rows], v_hat[cols]], axis=1)  # [D*D, 4d]
    return ad.reshape(flat, (n, n, -1))


@dataclass
class PairPrediction:
    probs: np.ndarray  # [D, D, 2]
    ec: np.ndarray  # [D, D] in {0, 1}


def classify_pairs(store: ParamStore, v_p: Tensor) -> Tensor:
    """Softmax(W_p^T v^p_ij + b_p) for every candidate; returns [D, D, 2]."""
    n = v_p.shape[0]
    flat = ad.reshape(v_p, (n * n, -1))
    logits = ad.add(ad.matmul(flat, store["pair.W_p"]), store["pair.b_p"])
    return ad.reshape(ad.softmax(logits, axis=-1), (n, n, 2))


def predict_labels(probs) -> PairPrediction:
    """Argmax per candidate; an exact 0.5/0.5 tie is labelled "not a pair"."""
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs)
    return PairPrediction(p, (p[..., 1] > p[..., 0]).astype(np.int64))


@dataclass(frozen=True)
class ExtractionResult:
    pairs: frozenset  # 1-based (emotion, cause)
    emotions: frozenset
    causes: frozenset

    def to_json(self, doc_id: str) -> dict:
        return {
            "id": doc_id,
            "pairs": [list(p) for p in sorted(self.pairs)],
            "emotions": sorted(self.emotions),
            "causes": sorted(self.causes),
        }


def derive_emotions(ec) -> np.ndarray:
    return (np.asarray(ec).sum(axis=1) > 0).astype(np.int64)


def derive_causes(ec) -> np.ndarray:
    return (np.asarray(ec).sum(axis=0) > 0).astype(np.int64)


def extraction_result(ec) -> ExtractionResult:
    ec = np.asarray(ec)
    pairs = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(ec)))
    emotions = frozenset(int(i) + 1 for i in np.flatnonzero(derive_emotions(ec)))
    causes = frozenset(int(j) + 1 for j in np.flatnonzero(derive_causes(ec)))
    assert emotions == {i for i, _ in pairs} and causes == {j for _, j in pairs}
    return ExtractionResult(pairs, emotions, causes)
