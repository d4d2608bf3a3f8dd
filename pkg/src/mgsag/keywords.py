"""Per-document keywords: TextRank key tokens, lexicon emotion words, and their union."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Document, read_word_list

KEYWORD_MODES = ("ew", "tw", "cw")


@dataclass
class CooccurrenceGraph:
    """Undirected weighted token graph; ``nodes`` keep first-occurrence order."""

    nodes: list[str]
    weights: dict[str, dict[str, float]]
    damping: float = 0.85
    tol: float = 1e-6
    max_iter: int = 100

    @classmethod
    def from_document(
        cls,
        doc: Document,
        window: int = 2,
        stopwords: Iterable[str] = (),
        damping: float = 0.85,
        tol: float = 1e-6,
        max_iter: int = 100,
    ) -> "CooccurrenceGraph":
        """Tokens co-occurring within ``window`` positions of the same clause get an edge.

        Stopwords are removed before windowing. Repeated co-occurrences add weight.
        """
        if window < 2:
            raise ValueError("window must be at least 2")
        stop = set(stopwords)
        nodes: list[str] = []
        seen: set[str] = set()
        weights: dict[str, dict[str, float]] = {}
        for clause in doc.clauses:
            toks = [t for t in clause.tokens if t not in stop]
            for t in toks:
                if t not in seen:
                    seen.add(t)
                    nodes.append(t)
                    weights[t] = {}
            for a in range(len(toks)):
                for b in range(a + 1, min(a + window, len(toks))):
                    u, v = toks[a], toks[b]
                    if u == v:
                        continue
                    weights[u][v] = weights[u].get(v, 0.0) + 1.0
                    weights[v][u] = weights[v].get(u, 0.0) + 1.0
        return cls(nodes, weights, damping, tol, max_iter)

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges: Iterable[tuple[str, str, float]], **kw) -> "CooccurrenceGraph":
        weights: dict[str, dict[str, float]] = {n: {} for n in nodes}
        for u, v, w in edges:
            if u == v:
                raise ValueError("self-edges are not allowed")
            weights[u][v] = weights[u].get(v, 0.0) + w
            weights[v][u] = weights[v].get(u, 0.0) + w
        return cls(list(nodes), weights, **kw)


def textrank_scores(graph: CooccurrenceGraph) -> dict[str, float]:
    """Weighted PageRank: s(v) = (1-d) + d * sum_u w_uv / out(u) * s(u).

    Synchronous updates from s = 1 until the largest change drops below
    ``graph.tol`` or ``graph.max_iter`` sweeps have run.
    """
    if not graph.nodes:
        raise ValueError("textrank on an empty graph")
    d = graph.damping
    out_weight = {u: sum(nbrs.values()) for u, nbrs in graph.weights.items()}
    scores = {n: 1.0 for n in graph.nodes}
    for _ in range(graph.max_iter):
        new = {}
        for v in graph.nodes:
            acc = 0.0
            for u, w in graph.weights[v].items():
                acc += w / out_weight[u] * scores[u]
            new[v] = (1.0 - d) + d * acc
        delta = max(abs(new[n] - scores[n]) for n in graph.nodes)
        scores = new
        if delta < graph.tol:
            break
    return scores


def select_key_phrases(scores: Mapping[str, float], ratio: float = 1 / 3, order: Sequence[str] | None = None) -> list[str]:
    """Top ``ceil(ratio * n)`` tokens by score; ties go to the earlier token.

    ``order`` gives document order; defaults to the iteration order of ``scores``.
    """
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    order = list(order) if order is not None else list(scores)
    position = {t: k for k, t in enumerate(order)}
    k = math.ceil(ratio * len(scores))
    ranked = sorted(scores, key=lambda t: (-scores[t], position.get(t, len(position))))
    return ranked[:k]


def load_lexicon(path) -> frozenset[str]:
    return frozenset(read_word_list(path))


def lexicon_emotion_words(doc: Document, lexicon) -> set[str]:
    """Document tokens found in the lexicon (a path or a collection of words)."""
    if not isinstance(lexicon, (set, frozenset, list, tuple)):
        lexicon = load_lexicon(lexicon)
    lex = set(lexicon)
    return {t for t in doc.tokens() if t in lex}


@dataclass
class TextRankConfig:
    window: int = 2
    damping: float = 0.85
    tol: float = 1e-6
    max_iter: int = 100
    ratio: float = 1 / 3
    stopwords: frozenset[str] = field(default_factory=frozenset)


@dataclass
class KeywordSet:
    emotion_words: frozenset[str]
    textrank_words: frozenset[str]
    union: tuple[str, ...]  # document order
    sources: dict[str, str]  # token -> "ew" | "tw" | "both"

    def __len__(self) -> int:
        return len(self.union)

    def to_json(self, doc_id: str) -> dict:
        return {
            "id": doc_id,
            "keywords": list(self.union),
            "sources": [self.sources[t] for t in self.union],
        }


def build_keyword_set(doc: Document, lexicon=(), textrank: TextRankConfig | None = None, mode: str = "cw") -> KeywordSet:
    mode = mode.lower()
    if mode not in KEYWORD_MODES:
        raise ValueError(f"keyword mode must be one of {KEYWORD_MODES}, got {mode!r}")
    textrank = textrank or TextRankConfig()
    ew: set[str] = set()
    tw: set[str] = set()
    if mode in ("ew", "cw"):
        ew = lexicon_emotion_words(doc, lexicon)
    if mode in ("tw", "cw"):
        graph = CooccurrenceGraph.from_document(
            doc, textrank.window, textrank.stopwords, textrank.damping, textrank.tol, textrank.max_iter
        )
        if graph.nodes:
            tw = set(select_key_phrases(textrank_scores(graph), textrank.ratio, graph.nodes))
    chosen = ew | tw
    union = []
    for t in doc.tokens():
        if t in chosen and t not in union:
            union.append(t)
    sources = {t: "both" if (t in ew and t in tw) else ("ew" if t in ew else "tw") for t in union}
    return KeywordSet(frozenset(ew), frozenset(tw), tuple(union), sources)


def coverage_stats(docs: Sequence[Document], keyword_sets: Sequence[KeywordSet]) -> dict[str, float]:
    """Fractions of emotion clauses, cause clauses, gold pairs and clauses holding a keyword."""
    if len(docs) != len(keyword_sets):
        raise ValueError("one keyword set per document is required")
    n = {"emotion_clauses": 0, "cause_clauses": 0, "pairs": 0, "clauses": 0}
    hit = dict.fromkeys(n, 0)
    for doc, ks in zip(docs, keyword_sets):
        kw = set(ks.union)
        covered = {c.index for c in doc.clauses if kw.intersection(c.tokens)}
        n["clauses"] += len(doc)
        hit["clauses"] += len(covered)
        n["emotion_clauses"] += len(doc.emotions)
        hit["emotion_clauses"] += len(doc.emotions & covered)
        n["cause_clauses"] += len(doc.causes)
        hit["cause_clauses"] += len(doc.causes & covered)
        n["pairs"] += len(doc.gold_pairs)
        hit["pairs"] += sum(1 for e, c in doc.gold_pairs if e in covered and c in covered)
    return {k: (hit[k] / n[k] if n[k] else 0.0) for k in n}


class KeywordExtractor(BaseEstimator, TransformerMixin):
    """Maps documents to :class:`KeywordSet` objects.

    Stateless apart from the lexicon and stopwords given at construction, so
    ``fit`` only validates parameters.
    """

    def __init__(self, lexicon=(), stopwords=(), mode="cw", window=2, damping=0.85, tol=1e-6, max_iter=100, ratio=1 / 3):
        self.lexicon = lexicon
        self.stopwords = stopwords
        self.mode = mode
        self.window = window
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter
        self.ratio = ratio

    def _textrank_config(self) -> TextRankConfig:
        return TextRankConfig(self.window, self.damping, self.tol, self.max_iter, self.ratio, frozenset(self.stopwords))

    def fit(self, docs, y=None):
        if self.mode.lower() not in KEYWORD_MODES:
            raise ValueError(f"mode must be one of {KEYWORD_MODES}")
        self.lexicon_ = frozenset(self.lexicon)
        return self

    def transform(self, docs) -> list[KeywordSet]:
        lex = getattr(self, "lexicon_", frozenset(self.lexicon))
        cfg = self._textrank_config()
        return [build_keyword_set(d, lex, cfg, self.mode) for d in docs]
