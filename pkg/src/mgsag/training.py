"""Training loop, P/R/F1 metrics, position-bias test splits and k-fold evaluation."""
from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, ParamStore, adam_step
from .config import TrainConfig
from .corpus import DISTANCE_BUCKETS, Document, EmbeddingTable, FoldPlan, make_folds
from .keywords import KeywordSet, build_keyword_set, coverage_stats
from .model import DocumentInputs, build_params, document_loss, forward, prepare_document, textrank_config
from .pairs import ExtractionResult, extraction_result, predict_labels

log = logging.getLogger(__name__)

TASKS = ("ECPE", "EE", "CE")
SPLITS = ("all", "bias", "nobias")
SPLIT_TITLES = {"all": "Test_all", "bias": "Test_Bias", "nobias": "Test_NoBias"}


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""


@dataclass
class Resources:
    """External inputs shared by every fold: embeddings, lexicon and stopwords."""

    embeddings: EmbeddingTable
    lexicon: frozenset = frozenset()
    stopwords: frozenset = frozenset()

    def keyword_set(self, doc: Document, config: TrainConfig) -> KeywordSet:
        return build_keyword_set(doc, self.lexicon, textrank_config(config, self.stopwords), config.keyword_mode)

    def prepare(self, docs: Sequence[Document], config: TrainConfig) -> list[DocumentInputs]:
        return [prepare_document(d, self.embeddings, config, self.keyword_set(d, config)) for d in docs]


# ---------------------------------------------------------------------------
# training


def train_fold(
    train_docs: Sequence[Document],
    config: TrainConfig,
    resources: Resources,
    seed: int | None = None,
    inputs: Sequence[DocumentInputs] | None = None,
    on_epoch: Callable[[int, ParamStore, float], bool] | None = None,
) -> tuple[ParamStore, list[float]]:
    """Adam, one document per step, documents reshuffled every epoch.

    Returns the parameters from the epoch with the lowest mean training loss
    and the per-epoch mean loss trace. ``on_epoch(epoch, store, loss)``
    returning True ends training after that epoch.
    """
    if not train_docs:
        raise ValueError("train_fold needs at least one document")
    seed = config.seed if seed is None else seed
    store = build_params(config, seed)
    if inputs is None:
        inputs = resources.prepare(train_docs, config)
    rng = np.random.default_rng([seed, 7])
    state = AdamState(learning_rate=config.learning_rate)
    trace: list[float] = []
    best_loss, best_state = math.inf, None
    for epoch in range(config.epochs):
        total = 0.0
        for k in rng.permutation(len(inputs)):
            inp = inputs[k]
            store.clear_grad()
            loss, parts = document_loss(store, inp, config, training=True, rng=rng)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite loss at epoch {epoch + 1}, document {inp.doc.id!r}: {parts}")
            ad.backward(loss, store.values())
            adam_step(store, state)
            total += value
        mean_loss = total / len(inputs)
        trace.append(mean_loss)
        log.debug("epoch %d loss %.6f", epoch + 1, mean_loss)
        if mean_loss < best_loss:
            best_loss, best_state = mean_loss, store.state_dict()
        if on_epoch is not None and on_epoch(epoch + 1, store, mean_loss):
            best_state = store.state_dict()
            break
    if best_state is not None:
        store.load_state_dict(best_state)
    store.clear_grad()
    return store, trace


def predict_inputs(store: ParamStore, inputs: DocumentInputs, config: TrainConfig) -> tuple[ExtractionResult, np.ndarray]:
    with ad.no_grad():
        out = forward(store, inputs, config, training=False)
    pred = predict_labels(out.pair_probs)
    return extraction_result(pred.ec), pred.probs


# ---------------------------------------------------------------------------
# metrics


def compute_prf(predicted, gold) -> tuple[float, float, float]:
    """Set-based precision, recall and F1; an empty prediction scores 0/0/0."""
    predicted, gold = set(predicted), set(gold)
    if not gold:
        raise ValueError("gold set is empty; every evaluated document needs at least one pair")
    return prf_from_counts(len(predicted & gold), len(predicted), len(gold))


def prf_from_counts(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    # 2c / (P + G) is the harmonic mean of p and r in one correctly rounded division
    f1 = 2 * correct / (predicted + gold) if correct else 0.0
    return p, r, f1


def task_items(result: ExtractionResult | Document, task: str) -> set:
    """Pair set (ECPE), emotion clause set (EE) or cause clause set (CE)."""
    if isinstance(result, Document):
        pairs, emotions, causes = set(result.gold_pairs), result.emotions, result.causes
    else:
        pairs, emotions, causes = result.pairs, result.emotions, result.causes
    if task == "ECPE":
        return set(pairs)
    if task == "EE":
        return set(emotions)
    if task == "CE":
        return set(causes)
    raise ValueError(f"unknown task {task!r}")


@dataclass
class Counts:
    correct: int = 0
    predicted: int = 0
    gold: int = 0

    def add(self, pred: set, gold: set) -> None:
        self.correct += len(pred & gold)
        self.predicted += len(pred)
        self.gold += len(gold)

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.correct + other.correct, self.predicted + other.predicted, self.gold + other.gold)

    def metrics(self) -> dict:
        p, r, f1 = prf_from_counts(self.correct, self.predicted, self.gold)
        return {"p": p, "r": r, "f1": f1, "correct": self.correct, "predicted": self.predicted, "gold": self.gold}


# ---------------------------------------------------------------------------
# position-bias diagnostics


@dataclass
class BiasSplit:
    bias_docs: set[str]
    nobias_docs: set[str]


def is_bias_document(doc: Document) -> bool:
    """Exactly one gold pair whose clauses are less than 2 apart."""
    if len(doc.gold_pairs) != 1:
        return False
    e, c = doc.gold_pairs[0]
    return abs(e - c) < 2


def split_bias(test_docs: Sequence[Document]) -> BiasSplit:
    bias = {d.id for d in test_docs if is_bias_document(d)}
    nobias = {d.id for d in test_docs} - bias
    assert not bias & nobias
    return BiasSplit(bias, nobias)


def distance_bucket(e: int, c: int) -> str:
    d = abs(e - c)
    return DISTANCE_BUCKETS[min(d, 3)]


def distance_histogram(docs: Sequence[Document]) -> dict[str, int]:
    hist = dict.fromkeys(DISTANCE_BUCKETS, 0)
    for doc in docs:
        for e, c in doc.gold_pairs:
            hist[distance_bucket(e, c)] += 1
    return hist


def histogram_csv(hist: dict[str, int]) -> str:
    total = sum(hist.values())
    lines = ["bucket,count,proportion"]
    for b in DISTANCE_BUCKETS:
        lines.append(f"{b},{hist[b]},{hist[b] / total if total else 0.0:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# evaluation


def evaluate_documents(
    store: ParamStore,
    docs: Sequence[Document],
    config: TrainConfig,
    resources: Resources,
    inputs: Sequence[DocumentInputs] | None = None,
) -> tuple[dict[str, dict[str, Counts]], list[ExtractionResult]]:
    """Predict once per document, then tally counts for Test_all and its bias subsets."""
    if inputs is None:
        inputs = resources.prepare(docs, config)
    split = split_bias(docs)
    counts = {s: {t: Counts() for t in TASKS} for s in SPLITS}
    results = []
    for doc, inp in zip(docs, inputs):
        res, _ = predict_inputs(store, inp, config)
        results.append(res)
        sub = "bias" if doc.id in split.bias_docs else "nobias"
        for t in TASKS:
            pred, gold = task_items(res, t), task_items(doc, t)
            counts["all"][t].add(pred, gold)
            counts[sub][t].add(pred, gold)
    return counts, results


def _fold_job(args):
    docs, plan, fold, repeat, seed, config, resources = args
    train, test = plan.split(docs, fold)
    store, trace = train_fold(train, config, resources, seed=seed)
    counts, _ = evaluate_documents(store, test, config, resources)
    split = split_bias(test)
    return {
        "fold": fold,
        "repeat": repeat,
        "seed": seed,
        "n_train": len(train),
        "n_test": len(test),
        "n_bias": len(split.bias_docs),
        "n_nobias": len(split.nobias_docs),
        "final_loss": trace[-1] if trace else None,
        "best_loss": min(trace) if trace else None,
        "metrics": {s: {t: counts[s][t].metrics() for t in TASKS} for s in SPLITS},
    }


def fold_seed(base: int, repeat: int, fold: int) -> int:
    return base + 1000 * repeat + fold


def cross_validate(
    docs: Sequence[Document],
    config: TrainConfig,
    resources: Resources,
    jobs: int = 1,
    plan: FoldPlan | None = None,
) -> "EvalReport":
    """k-fold CV repeated over ``config.repeats`` seeds on one fold plan.

    Each fold's model is trained once and evaluated on Test_all; the same
    parameters then score the Test_Bias / Test_NoBias subsets.
    """
    docs = list(docs)
    plan = plan or make_folds(docs, config.folds, config.seed)
    tasks = [
        (docs, plan, f, r, fold_seed(config.seed, r, f), config, resources)
        for r in range(config.repeats)
        for f in range(plan.k)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_fold_job, tasks))
    else:
        folds = [_fold_job(t) for t in tasks]
    folds.sort(key=lambda r: (r["repeat"], r["fold"]))

    keyword_sets = {
        mode: [build_keyword_set(d, resources.lexicon, textrank_config(config, resources.stopwords), mode) for d in docs]
        for mode in ("ew", "tw", "cw")
    }
    coverage = {mode: coverage_stats(docs, ks) for mode, ks in keyword_sets.items()}
    return EvalReport.from_folds(config, folds, distance_histogram(docs), coverage)


@dataclass
class EvalReport:
    config: dict
    folds: list[dict]
    mean: dict
    std: dict
    pooled: dict
    distance_histogram: dict
    keyword_coverage: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, config: TrainConfig, folds: list[dict], histogram: dict, coverage: dict) -> "EvalReport":
        mean, std, pooled = {}, {}, {}
        for s in SPLITS:
            mean[s], std[s], pooled[s] = {}, {}, {}
            for t in TASKS:
                rows = [f["metrics"][s][t] for f in folds if f["metrics"][s][t]["gold"] > 0]
                mean[s][t] = {k: statistics.fmean(r[k] for r in rows) if rows else 0.0 for k in ("p", "r", "f1")}
                std[s][t] = {k: statistics.pstdev(r[k] for r in rows) if rows else 0.0 for k in ("p", "r", "f1")}
                total = Counts()
                for f in folds:
                    m = f["metrics"][s][t]
                    total = total + Counts(m["correct"], m["predicted"], m["gold"])
                pooled[s][t] = total.metrics()
        return cls(config.to_dict(), folds, mean, std, pooled, histogram, coverage)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "folds": self.folds,
            "mean": self.mean,
            "std": self.std,
            "pooled": self.pooled,
            "distance_histogram": self.distance_histogram,
            "keyword_coverage": self.keyword_coverage,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvalReport":
        return cls(**obj)

    def table(self) -> str:
        """Plain-text layout with one row per test split."""
        header = f"{'Split':<12}" + "".join(f"| {t:<6}{'P':>7}{'R':>7}{'F1':>7} " for t in TASKS)
        lines = [header, "-" * len(header)]
        for s in SPLITS:
            row = f"{SPLIT_TITLES[s]:<12}"
            for t in TASKS:
                m = self.mean[s][t]
                row += f"| {'':<6}{m['p']:7.4f}{m['r']:7.4f}{m['f1']:7.4f} "
            lines.append(row)
        return "\n".join(lines) + "\n"
