"""JSON schemas for files written by the CLI; every write is validated and re-read."""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

_PAIR = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}

DOCUMENT = {
    "type": "object",
    "required": ["id", "clauses", "pairs"],
    "properties": {
        "id": {"type": "string"},
        "clauses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tokens"],
                "properties": {"tokens": {"type": "array", "items": {"type": "string"}}},
            },
        },
        "pairs": {"type": "array", "items": _PAIR},
    },
}

PREDICTION = {
    "type": "object",
    "required": ["id", "pairs", "emotions", "causes"],
    "properties": {
        "id": {"type": "string"},
        "pairs": {"type": "array", "items": _PAIR},
        "emotions": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "causes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
}

KEYWORDS = {
    "type": "object",
    "required": ["id", "keywords", "sources"],
    "properties": {
        "id": {"type": "string"},
        "keywords": {"type": "array", "items": {"type": "string"}},
        "sources": {"type": "array", "items": {"enum": ["ew", "tw", "both"]}},
    },
}

ATTENTION = {
    "type": "object",
    "required": ["doc_id", "keywords", "alpha"],
    "properties": {
        "doc_id": {"type": "string"},
        "keywords": {"type": "array", "items": {"type": "string"}},
        "alpha": {"type": "array", "items": {"type": "array", "items": _UNIT}},
    },
}

_COVERAGE_ROW = {
    "type": "object",
    "required": ["emotion_clauses", "cause_clauses", "pairs", "clauses"],
    "additionalProperties": _UNIT,
}

COVERAGE = {"type": "object", "additionalProperties": _COVERAGE_ROW}

_PRF = {
    "type": "object",
    "required": ["p", "r", "f1"],
    "properties": {
        "p": _UNIT,
        "r": _UNIT,
        "f1": _UNIT,
        "correct": {"type": "integer", "minimum": 0},
        "predicted": {"type": "integer", "minimum": 0},
        "gold": {"type": "integer", "minimum": 0},
    },
}
_TASKS = {"type": "object", "required": ["ECPE", "EE", "CE"], "additionalProperties": _PRF}
_SPLITS = {"type": "object", "required": ["all", "bias", "nobias"], "additionalProperties": _TASKS}

REPORT = {
    "type": "object",
    "required": ["config", "folds", "mean", "std", "pooled", "distance_histogram", "keyword_coverage"],
    "properties": {
        "config": {"type": "object"},
        "folds": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["fold", "repeat", "seed", "n_test", "n_bias", "n_nobias", "metrics"],
                "properties": {"metrics": _SPLITS},
            },
        },
        "mean": _SPLITS,
        "std": {"type": "object"},
        "pooled": _SPLITS,
        "distance_histogram": {
            "type": "object",
            "required": ["Dist0", "Dist1", "Dist2", "Dist>2"],
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "keyword_coverage": COVERAGE,
    },
}

LOSS_TRACE = {
    "type": "object",
    "required": ["epochs", "loss"],
    "properties": {"epochs": {"type": "integer"}, "loss": {"type": "array", "items": {"type": "number"}}},
}

GRADCHECK = {
    "type": "object",
    "required": ["max_relative_error", "threshold", "n_params", "passed"],
    "properties": {
        "max_relative_error": {"type": "number", "minimum": 0},
        "threshold": {"type": "number"},
        "n_params": {"type": "integer"},
        "passed": {"type": "boolean"},
    },
}


def write_json(path, obj, schema) -> None:
    jsonschema.validate(obj, schema)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    jsonschema.validate(json.loads(Path(path).read_text(encoding="utf-8")), schema)


def write_jsonl(path, rows, schema) -> None:
    rows = list(rows)
    for row in rows:
        jsonschema.validate(row, schema)
    Path(path).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        jsonschema.validate(json.loads(line), schema)
