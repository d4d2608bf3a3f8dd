"""Run configuration shared by the estimator, the evaluation harness and the CLI."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

LOSS_MODES = ("full", "pair")


@dataclass
class TrainConfig:
    # optimisation
    epochs: int = 30
    learning_rate: float = 1e-3
    seed: int = 0
    folds: int = 10
    repeats: int = 1
    loss_mode: str = "full"  # "full" = pair + emo + cau, "pair" = pair only
    dropout_rate: float = 0.1
    # architecture; clause_hidden is half the embedding dimension
    embedding_dim: int = 200
    word_hidden: int = 200
    clause_hidden: int = 100
    gat_layers: int = 2
    leaky_slope: float = 0.2
    # ablations
    fgsag_off: bool = False
    cgsag_off: bool = False
    keyword_mode: str = "cw"
    random_keyword_features: bool = False
    fgsag_norm: str = "over_clauses"
    # keyword extraction
    textrank_window: int = 2
    textrank_damping: float = 0.85
    textrank_tol: float = 1e-6
    textrank_max_iter: int = 100
    keyword_ratio: float = 1 / 3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("epochs", "folds", "repeats"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("embedding_dim", "word_hidden", "clause_hidden", "gat_layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.keyword_mode not in ("ew", "tw", "cw"):
            raise ValueError("keyword_mode must be ew, tw or cw")
        if self.fgsag_norm not in ("over_clauses", "over_keywords"):
            raise ValueError("fgsag_norm must be over_clauses or over_keywords")
        if self.embedding_dim != 2 * self.clause_hidden:
            raise ValueError(
                f"embedding_dim ({self.embedding_dim}) must equal 2 * clause_hidden ({2 * self.clause_hidden})"
            )
        if not 0 < self.keyword_ratio <= 1:
            raise ValueError("keyword_ratio must be in (0, 1]")

    @classmethod
    def scaled(cls, dim: int, **overrides) -> "TrainConfig":
        """Config with embedding_dim=dim, word_hidden=dim, clause_hidden=dim//2."""
        return cls(embedding_dim=dim, word_hidden=dim, clause_hidden=dim // 2, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def _coerce(raw: str, typ):
    if typ is bool or typ == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ is int or typ == "int":
        return int(raw)
    if typ is float or typ == "float":
        return float(raw)
    return raw.strip()


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines ('#' comments allowed) into typed overrides."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(value, types[key])
    return out
