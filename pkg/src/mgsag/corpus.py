"""Documents, corpus files, embeddings, fold plans and a synthetic corpus generator."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DISTANCE_BUCKETS = ("Dist0", "Dist1", "Dist2", "Dist>2")


class CorpusError(ValueError):
    """Malformed corpus, embedding or lexicon input."""


@dataclass(frozen=True)
class Clause:
    index: int  # 1-based
    tokens: tuple[str, ...]
    is_emotion: bool = False
    is_cause: bool = False


@dataclass(frozen=True)
class Document:
    id: str
    clauses: tuple[Clause, ...]
    gold_pairs: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, doc_id: str, clause_tokens: Sequence[Sequence[str]], pairs: Iterable[Sequence[int]]) -> "Document":
        """Validate indices and derive per-clause emotion/cause flags."""
        n = len(clause_tokens)
        gold = tuple(sorted({(int(e), int(c)) for e, c in pairs}))
        for e, c in gold:
            if not (1 <= e <= n and 1 <= c <= n):
                raise CorpusError(f"document {doc_id!r}: pair ({e}, {c}) out of range for {n} clauses")
        emotions = {e for e, _ in gold}
        causes = {c for _, c in gold}
        clauses = tuple(
            Clause(i, tuple(toks), i in emotions, i in causes) for i, toks in enumerate(clause_tokens, start=1)
        )
        return cls(str(doc_id), clauses, gold)

    def __len__(self) -> int:
        return len(self.clauses)

    @property
    def emotions(self) -> set[int]:
        return {e for e, _ in self.gold_pairs}

    @property
    def causes(self) -> set[int]:
        return {c for _, c in self.gold_pairs}

    def tokens(self) -> list[str]:
        return [t for c in self.clauses for t in c.tokens]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "clauses": [{"tokens": list(c.tokens)} for c in self.clauses],
            "pairs": [list(p) for p in self.gold_pairs],
        }

    def permuted(self, order: Sequence[int]) -> "Document":
        """Reorder clauses; ``order[k]`` is the old 1-based index placed at position k+1."""
        new_pos = {old: new for new, old in enumerate(order, start=1)}
        return Document.build(
            self.id,
            [self.clauses[old - 1].tokens for old in order],
            [(new_pos[e], new_pos[c]) for e, c in self.gold_pairs],
        )


def document_from_json(obj: dict) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError("expected a JSON object")
    try:
        doc_id = obj["id"]
        clauses = [list(c["tokens"]) for c in obj["clauses"]]
        pairs = obj.get("pairs", [])
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"missing field {exc}") from None
    for toks in clauses:
        if not all(isinstance(t, str) for t in toks):
            raise CorpusError(f"document {doc_id!r}: tokens must be strings")
    if not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in pairs):
        raise CorpusError(f"document {doc_id!r}: pairs must be [emotion, cause] lists")
    return Document.build(doc_id, clauses, pairs)


def load_corpus(path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            try:
                docs.append(document_from_json(obj))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return docs


def dumps_corpus(docs: Iterable[Document]) -> str:
    return "".join(json.dumps(d.to_json(), ensure_ascii=False) + "\n" for d in docs)


def save_corpus(docs: Iterable[Document], path) -> None:
    Path(path).write_text(dumps_corpus(docs), encoding="utf-8")


def read_word_list(path) -> list[str]:
    """One word per line; blank lines and '#' comments skipped."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip()
            if w and not w.startswith("#"):
                words.append(w)
    return words


# ---------------------------------------------------------------------------
# embeddings


def _token_seed(seed: int, token: str, namespace: str) -> int:
    digest = hashlib.blake2b(f"{namespace}\x00{seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class EmbeddingTable:
    """Token vectors with a seeded, cached random vector for unseen tokens.

    OOV vectors depend only on (seed, token), never on lookup order.
    """

    def __init__(self, dimension: int = 200, vectors: dict[str, np.ndarray] | None = None, seed: int = 0, scale: float = 0.25):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.scale = scale
        self.vectors: dict[str, np.ndarray] = {}
        for tok, vec in (vectors or {}).items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dimension,):
                raise CorpusError(f"embedding for {tok!r} has shape {vec.shape}, expected ({dimension},)")
            self.vectors[tok] = vec
        self._oov: dict[tuple[str, str], np.ndarray] = {}

    def random_vector(self, token: str, namespace: str = "oov") -> np.ndarray:
        key = (namespace, token)
        vec = self._oov.get(key)
        if vec is None:
            rng = np.random.default_rng(_token_seed(self.seed, token, namespace))
            vec = rng.uniform(-self.scale, self.scale, size=self.dimension)
            self._oov[key] = vec
        return vec

    def __getitem__(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        return vec if vec is not None else self.random_vector(token)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def lookup(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dimension))
        return np.stack([self[t] for t in tokens])

    @classmethod
    def load(cls, path, seed: int = 0, dimension: int | None = None) -> "EmbeddingTable":
        """Read ``<token> <v1> ... <vdim>`` lines with an optional ``<count> <dim>`` header."""
        vectors: dict[str, np.ndarray] = {}
        dim = dimension
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split()
                if not parts:
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    header_dim = int(parts[1])
                    if dim is not None and dim != header_dim:
                        raise CorpusError(f"{path}: header dimension {header_dim} != expected {dim}")
                    dim = header_dim
                    continue
                try:
                    vec = np.array([float(x) for x in parts[1:]])
                except ValueError:
                    raise CorpusError(f"{path}:{lineno}: non-numeric vector component") from None
                if dim is None:
                    dim = vec.size
                if vec.size != dim:
                    raise CorpusError(f"{path}:{lineno}: expected {dim} components, got {vec.size}")
                vectors[parts[0]] = vec
        if dim is None:
            raise CorpusError(f"{path}: no vectors found")
        return cls(dim, vectors, seed=seed)


# ---------------------------------------------------------------------------
# folds


@dataclass
class FoldPlan:
    k: int
    assignments: dict[str, int]
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [d for d, f in self.assignments.items() if f == fold]

    def split(self, docs: Sequence[Document], fold: int) -> tuple[list[Document], list[Document]]:
        train = [d for d in docs if self.assignments[d.id] != fold]
        test = [d for d in docs if self.assignments[d.id] == fold]
        return train, test

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for f in self.assignments.values():
            counts[f] += 1
        return counts


def make_folds(docs: Sequence[Document], k: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle followed by round-robin assignment."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > len(docs):
        raise ValueError(f"cannot make {k} folds from {len(docs)} documents")
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise CorpusError("document ids must be unique for fold planning")
    order = np.random.default_rng(seed).permutation(len(ids))
    return FoldPlan(k, {ids[j]: pos % k for pos, j in enumerate(order)}, seed)


# ---------------------------------------------------------------------------
# synthetic corpus

FIGURE1_PROFILE = (0.51, 0.26, 0.08, 0.15)


def _sample_distance(rng: np.random.Generator, profile: np.ndarray, max_clauses: int) -> int:
    bucket = int(rng.choice(4, p=profile))
    if bucket < 3:
        return bucket
    return int(rng.integers(3, max_clauses))  # 3 .. max_clauses-1


def generate_synthetic_corpus(
    n_docs: int = 20,
    vocab_size: int = 50,
    max_clauses: int = 8,
    distance_profile: Sequence[float] = FIGURE1_PROFILE,
    seed: int = 0,
    *,
    min_clauses: int = 2,
    clause_length: tuple[int, int] = (3, 6),
    n_emotion_words: int = 4,
    n_cause_words: int = 4,
    multi_pair_rate: float = 0.0,
) -> list[Document]:
    """Documents with a planted lexical signal for emotion and cause clauses.

    Every emotion clause carries one ``emo_*`` token and every cause clause one
    ``cause_*`` token; the remaining tokens are Zipf-distributed fillers
    ``w0..w{vocab_size-1}``. Pair distances follow ``distance_profile`` over
    the buckets (0, 1, 2, >2). With probability ``multi_pair_rate`` an emotion
    clause gets a second cause clause.
    """
    profile = np.asarray(distance_profile, dtype=np.float64)
    if profile.shape != (4,) or np.any(profile < 0) or not math.isclose(profile.sum(), 1.0, abs_tol=1e-9):
        raise ValueError(f"distance_profile must be a probability vector over 4 buckets, got {distance_profile}")
    if n_docs <= 0 or vocab_size <= 0 or max_clauses <= 0:
        raise ValueError("n_docs, vocab_size and max_clauses must be positive")
    if profile[3] > 0 and max_clauses < 4:
        raise ValueError("a nonzero Dist>2 probability needs max_clauses >= 4")
    needed = max(int(np.flatnonzero(profile)[-1]), 0)
    if needed >= max_clauses:
        raise ValueError(f"max_clauses={max_clauses} too small for distance bucket {needed}")
    lo, hi = clause_length
    if not 1 <= lo <= hi:
        raise ValueError("clause_length must satisfy 1 <= lo <= hi")
    if not 0.0 <= multi_pair_rate <= 1.0:
        raise ValueError("multi_pair_rate must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    fillers = [f"w{k}" for k in range(vocab_size)]
    zipf = 1.0 / np.arange(1, vocab_size + 1)
    zipf /= zipf.sum()
    docs = []
    for n in range(n_docs):
        dist = _sample_distance(rng, profile, max_clauses)
        n_clauses = int(rng.integers(max(min_clauses, dist + 1), max_clauses + 1))
        anchors = [e for e in range(1, n_clauses + 1) if e - dist >= 1 or e + dist <= n_clauses]
        emo = anchors[int(rng.integers(len(anchors)))]
        candidates = [c for c in (emo - dist, emo + dist) if 1 <= c <= n_clauses]
        cause = candidates[int(rng.integers(len(candidates)))]
        pairs = [(emo, cause)]
        if rng.random() < multi_pair_rate:
            for _ in range(10):
                d2 = _sample_distance(rng, profile, max_clauses)
                opts = [c for c in (emo - d2, emo + d2) if 1 <= c <= n_clauses and c != cause]
                if opts:
                    pairs.append((emo, opts[int(rng.integers(len(opts)))]))
                    break
        clauses = []
        for i in range(1, n_clauses + 1):
            length = int(rng.integers(lo, hi + 1))
            toks = [fillers[j] for j in rng.choice(vocab_size, size=length, p=zipf)]
            planted = []
            if i == emo:
                planted.append(f"emo_{int(rng.integers(n_emotion_words))}")
            if any(c == i for _, c in pairs):
                planted.append(f"cause_{int(rng.integers(n_cause_words))}")
            for tok in planted:
                toks.insert(int(rng.integers(len(toks) + 1)), tok)
            clauses.append(toks)
        docs.append(Document.build(f"syn{n:05d}", clauses, pairs))
    return docs


def synthetic_lexicon(n_emotion_words: int = 4) -> list[str]:
    return [f"emo_{k}" for k in range(n_emotion_words)]
