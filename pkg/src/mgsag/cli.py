"""Command line entry point: ``mgsag <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema

from . import autodiff as ad
from . import schemas
from .autodiff import finite_difference_check
from .config import TrainConfig, read_config_file
from .corpus import (
    FIGURE1_PROFILE,
    CorpusError,
    EmbeddingTable,
    generate_synthetic_corpus,
    load_corpus,
    read_word_list,
    save_corpus,
    synthetic_lexicon,
)
from .estimator import load_params, save_params
from .graphs import attention_json
from .keywords import build_keyword_set, coverage_stats
from .model import build_params, corpus_loss, forward, textrank_config
from .training import (
    DivergenceError,
    EvalReport,
    Resources,
    TASKS,
    SPLITS,
    cross_validate,
    distance_histogram,
    evaluate_documents,
    histogram_csv,
    split_bias,
    train_fold,
)

log = logging.getLogger("mgsag")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag -> TrainConfig field
_CONFIG_FLAGS = {
    "seed": "seed",
    "folds": "folds",
    "repeats": "repeats",
    "epochs": "epochs",
    "lr": "learning_rate",
    "dropout": "dropout_rate",
    "keyword_mode": "keyword_mode",
    "fgsag_norm": "fgsag_norm",
}


def _add_common(p: argparse.ArgumentParser, corpus_required: bool = True) -> None:
    p.add_argument("--corpus", required=corpus_required, help="JSON Lines corpus file")
    p.add_argument("--embeddings", help="word vector text file")
    p.add_argument("--lexicon", help="sentiment lexicon, one word per line")
    p.add_argument("--stopwords", help="stopword list, one word per line")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--dim", type=int, help="embedding size; word hidden = dim, clause hidden = dim/2")
    p.add_argument("--keyword-mode", choices=["ew", "tw", "cw"])
    p.add_argument("--no-fgsag", action="store_true")
    p.add_argument("--no-cgsag", action="store_true")
    p.add_argument("--loss", choices=["pair", "full"])
    p.add_argument("--fgsag-norm", choices=["clauses", "keywords"])
    p.add_argument("--random-keyword-features", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mgsag", description="Emotion-cause pair extraction with multi-granularity semantic graphs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus and its lexicon")
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--max-clauses", type=int, default=8)
    p.add_argument("--profile", default=",".join(str(x) for x in FIGURE1_PROFILE), help="Dist0,Dist1,Dist2,Dist>2")
    p.add_argument("--multi-pair-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("keywords", help="keyword sets and coverage statistics")
    _add_common(p)

    p = sub.add_parser("train", help="train on the whole corpus and dump parameters")
    _add_common(p)

    p = sub.add_parser("eval", help="predict with saved parameters and score")
    _add_common(p)
    p.add_argument("--params", required=True, help="params.npz written by train")

    p = sub.add_parser("cv", help="k-fold cross-validation with bias splits")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_common(p, corpus_required=False)
    p.add_argument("--docs", type=int, default=3)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-4)

    p = sub.add_parser("stats", help="pair distance histogram")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=".")
    return parser


def resolve_config(args, base: TrainConfig | None = None) -> TrainConfig:
    """Defaults < config file < command-line flags."""
    values = (base or TrainConfig()).to_dict()
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if getattr(args, "dim", None):
        d = args.dim
        if d < 2 or d % 2:
            raise UsageError("--dim must be an even integer >= 2")
        values.update(embedding_dim=d, word_hidden=d, clause_hidden=d // 2)
    for flag, key in _CONFIG_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
    if values.get("fgsag_norm") in ("clauses", "keywords"):
        values["fgsag_norm"] = "over_" + values["fgsag_norm"]
    if getattr(args, "loss", None):
        values["loss_mode"] = args.loss
    if getattr(args, "no_fgsag", False):
        values["fgsag_off"] = True
    if getattr(args, "no_cgsag", False):
        values["cgsag_off"] = True
    if getattr(args, "random_keyword_features", False):
        values["random_keyword_features"] = True
    try:
        return TrainConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _print_config(command: str, payload: dict) -> None:
    print(f"[{command}] resolved config: " + json.dumps(payload, sort_keys=True), flush=True)


def _resources(args, config: TrainConfig) -> Resources:
    if args.embeddings:
        emb = EmbeddingTable.load(args.embeddings, seed=config.seed)
        if emb.dimension != config.embedding_dim:
            raise UsageError(
                f"embedding file has dimension {emb.dimension}; pass --dim {emb.dimension} to match"
            )
    else:
        emb = EmbeddingTable(config.embedding_dim, seed=config.seed)
    lexicon = frozenset(read_word_list(args.lexicon)) if args.lexicon else frozenset()
    stopwords = frozenset(read_word_list(args.stopwords)) if args.stopwords else frozenset()
    return Resources(emb, lexicon, stopwords)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    docs = load_corpus(args.corpus)
    if not docs:
        raise CorpusError(f"{args.corpus}: corpus is empty")
    return docs


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    try:
        profile = [float(x) for x in args.profile.split(",")]
    except ValueError:
        raise UsageError(f"--profile must be four comma-separated numbers, got {args.profile!r}") from None
    payload = {
        "docs": args.docs,
        "vocab": args.vocab,
        "max_clauses": args.max_clauses,
        "profile": profile,
        "multi_pair_rate": args.multi_pair_rate,
        "seed": args.seed,
    }
    _print_config("synth", payload)
    try:
        docs = generate_synthetic_corpus(
            args.docs, args.vocab, args.max_clauses, profile, args.seed, multi_pair_rate=args.multi_pair_rate
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    save_corpus(docs, out / "corpus.jsonl")
    for line in (out / "corpus.jsonl").read_text(encoding="utf-8").splitlines():
        jsonschema.validate(json.loads(line), schemas.DOCUMENT)
    (out / "lexicon.txt").write_text("".join(w + "\n" for w in synthetic_lexicon()), encoding="utf-8")
    print(f"wrote {len(docs)} documents to {out / 'corpus.jsonl'}")
    return EXIT_OK


def cmd_keywords(args) -> int:
    config = resolve_config(args)
    _print_config("keywords", config.to_dict())
    docs = _load(args)
    res = _resources(args, config)
    tr = textrank_config(config, res.stopwords)
    sets = {m: [build_keyword_set(d, res.lexicon, tr, m) for d in docs] for m in ("ew", "tw", "cw")}
    out = _out_dir(args)
    chosen = sets[config.keyword_mode]
    schemas.write_jsonl(out / "keywords.jsonl", [ks.to_json(d.id) for d, ks in zip(docs, chosen)], schemas.KEYWORDS)
    coverage = {m: coverage_stats(docs, s) for m, s in sets.items()}
    schemas.write_json(out / "coverage.json", coverage, schemas.COVERAGE)
    for m, row in coverage.items():
        print(f"w/ {m.upper()}: " + "  ".join(f"{k}={v:.3f}" for k, v in row.items()))
    return EXIT_OK


def cmd_train(args) -> int:
    config = resolve_config(args)
    _print_config("train", config.to_dict())
    docs = _load(args)
    res = _resources(args, config)
    t0 = time.time()
    store, trace = train_fold(docs, config, res)
    out = _out_dir(args)
    save_params(out / "params.npz", store, config)
    load_params(out / "params.npz")
    schemas.write_json(out / "loss_trace.json", {"epochs": len(trace), "loss": trace}, schemas.LOSS_TRACE)
    print(f"trained {store.n_params()} parameters for {len(trace)} epochs in {time.time() - t0:.1f}s")
    if trace:
        print(f"final loss {trace[-1]:.6f}, best {min(trace):.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    store, saved = load_params(args.params)
    config = resolve_config(args, base=saved)
    arch = ("embedding_dim", "word_hidden", "clause_hidden", "gat_layers", "fgsag_off", "cgsag_off", "loss_mode")
    changed = [k for k in arch if getattr(config, k) != getattr(saved, k)]
    if changed:
        raise UsageError(f"flags change the saved architecture: {changed}")
    _print_config("eval", config.to_dict())
    docs = _load(args)
    res = _resources(args, config)
    inputs = res.prepare(docs, config)
    counts, results = evaluate_documents(store, docs, config, res, inputs)
    out = _out_dir(args)
    schemas.write_jsonl(
        out / "predictions.jsonl", [r.to_json(d.id) for d, r in zip(docs, results)], schemas.PREDICTION
    )
    attn = []
    for d, inp in zip(docs, inputs):
        with ad.no_grad():
            fw = forward(store, inp, config)
        attn.append(json.loads(attention_json(d.id, inp.keywords, fw.keyword_attention)))
    schemas.write_jsonl(out / "attention.jsonl", attn, schemas.ATTENTION)
    split = split_bias(docs)
    fold = {
        "fold": 0,
        "repeat": 0,
        "seed": config.seed,
        "n_train": 0,
        "n_test": len(docs),
        "n_bias": len(split.bias_docs),
        "n_nobias": len(split.nobias_docs),
        "final_loss": None,
        "best_loss": None,
        "metrics": {s: {t: counts[s][t].metrics() for t in TASKS} for s in SPLITS},
    }
    coverage = {
        m: coverage_stats(docs, [build_keyword_set(d, res.lexicon, textrank_config(config, res.stopwords), m) for d in docs])
        for m in ("ew", "tw", "cw")
    }
    report = EvalReport.from_folds(config, [fold], distance_histogram(docs), coverage)
    schemas.write_json(out / "report.json", report.to_json(), schemas.REPORT)
    (out / "report.txt").write_text(report.table(), encoding="utf-8")
    print(report.table(), end="")
    return EXIT_OK


def cmd_cv(args) -> int:
    config = resolve_config(args)
    _print_config("cv", config.to_dict())
    docs = _load(args)
    if config.folds > len(docs):
        raise CorpusError(f"cannot make {config.folds} folds from {len(docs)} documents")
    res = _resources(args, config)
    report = cross_validate(docs, config, res, jobs=max(1, args.jobs))
    out = _out_dir(args)
    schemas.write_json(out / "report.json", report.to_json(), schemas.REPORT)
    (out / "report.txt").write_text(report.table(), encoding="utf-8")
    (out / "histogram.csv").write_text(histogram_csv(report.distance_histogram), encoding="utf-8")
    print(report.table(), end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    base = TrainConfig.scaled(4)
    config = resolve_config(args, base=base).replace(dropout_rate=0.0)
    payload = config.to_dict() | {"docs": args.docs, "eps": args.eps, "threshold": args.threshold}
    _print_config("gradcheck", payload)
    if args.corpus:
        docs = _load(args)[: args.docs]
        lexicon = frozenset(read_word_list(args.lexicon)) if args.lexicon else frozenset()
    else:
        docs = generate_synthetic_corpus(
            args.docs, vocab_size=20, max_clauses=5, seed=config.seed, clause_length=(2, 4)
        )
        lexicon = frozenset(synthetic_lexicon())
    res = _resources(args, config)
    if not args.lexicon:
        res.lexicon = lexicon
    store = build_params(config)
    inputs = res.prepare(docs, config)
    t0 = time.time()
    err = finite_difference_check(lambda s: corpus_loss(s, inputs, config), store, args.eps)
    passed = err < args.threshold
    out = _out_dir(args)
    schemas.write_json(
        out / "gradcheck.json",
        {"max_relative_error": err, "threshold": args.threshold, "n_params": store.n_params(), "passed": passed},
        schemas.GRADCHECK,
    )
    print(f"max relative error {err:.3e} over {store.n_params()} coordinates ({time.time() - t0:.1f}s)")
    return EXIT_OK if passed else EXIT_NUMERIC


def cmd_stats(args) -> int:
    _print_config("stats", {"corpus": args.corpus, "out": args.out})
    docs = load_corpus(args.corpus)
    hist = distance_histogram(docs)
    out = _out_dir(args)
    (out / "histogram.csv").write_text(histogram_csv(hist), encoding="utf-8")
    print(histogram_csv(hist), end="")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "keywords": cmd_keywords,
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "gradcheck": cmd_gradcheck,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mgsag: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, FloatingPointError) as exc:
        print(f"mgsag: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, OSError, KeyError, ValueError, jsonschema.ValidationError) as exc:
        print(f"mgsag: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
