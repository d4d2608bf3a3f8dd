import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgsag.corpus import (
    CorpusError,
    Document,
    EmbeddingTable,
    generate_synthetic_corpus,
    load_corpus,
    make_folds,
    read_word_list,
    save_corpus,
)
from mgsag.training import distance_histogram


def test_build_derives_flags(bus_doc):
    assert len(bus_doc) == 8
    assert bus_doc.emotions == {7} and bus_doc.causes == {2}
    assert bus_doc.clauses[6].is_emotion and not bus_doc.clauses[6].is_cause
    assert bus_doc.clauses[1].is_cause
    assert "angry" in bus_doc.clauses[6].tokens


def test_build_rejects_out_of_range():
    with pytest.raises(CorpusError, match="out of range"):
        Document.build("x", [["a"], ["b"]], [(1, 3)])


def test_permuted_moves_pairs(bus_doc):
    order = [8, 7, 6, 5, 4, 3, 2, 1]
    p = bus_doc.permuted(order)
    assert p.gold_pairs == ((2, 7),)
    assert p.clauses[1].tokens == bus_doc.clauses[6].tokens


def test_roundtrip(tmp_path, bus_doc, micro_corpus):
    path = tmp_path / "c.jsonl"
    save_corpus([bus_doc, *micro_corpus], path)
    back = load_corpus(path)
    assert back == [bus_doc, *micro_corpus]


def test_empty_file_is_empty_corpus(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_load_reports_line_number(tmp_path, bus_doc):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(bus_doc.to_json()) + "\n{not json\n")
    with pytest.raises(CorpusError, match=":2:"):
        load_corpus(path)


def test_load_rejects_bad_pair(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"id": "a", "clauses": [{"tokens": ["x"]}], "pairs": [[1, 2]]}) + "\n")
    with pytest.raises(CorpusError, match=":1:"):
        load_corpus(path)


def test_load_rejects_missing_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"id": "a", "pairs": []}) + "\n")
    with pytest.raises(CorpusError):
        load_corpus(path)


def test_word_list_skips_comments(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# header\nangry\n\nhappy\n")
    assert read_word_list(path) == ["angry", "happy"]


# -- embeddings -----------------------------------------------------------


def test_oov_vectors_independent_of_lookup_order():
    a, b = EmbeddingTable(8, seed=3), EmbeddingTable(8, seed=3)
    va = a.lookup(["x", "y"])
    vb = b.lookup(["y", "x"])
    np.testing.assert_array_equal(va[0], vb[1])
    assert np.all(np.abs(va) <= 0.25)


def test_oov_depends_on_seed_and_namespace():
    t = EmbeddingTable(8, seed=0)
    assert not np.array_equal(t["x"], EmbeddingTable(8, seed=1)["x"])
    assert not np.array_equal(t["x"], t.random_vector("x", "rw"))


def test_embedding_file(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("2 3\nangry 1 2 3\nsad 0 0 1\n")
    t = EmbeddingTable.load(path)
    assert t.dimension == 3 and "angry" in t
    np.testing.assert_array_equal(t["angry"], [1, 2, 3])
    path.write_text("angry 1 2 3\nsad 0 1\n")
    with pytest.raises(CorpusError, match=":2:"):
        EmbeddingTable.load(path)


# -- folds ----------------------------------------------------------------


def test_fold_sizes_balanced():
    docs = generate_synthetic_corpus(23, seed=4)
    plan = make_folds(docs, k=10, seed=0)
    assert sorted(plan.sizes()) == [2] * 7 + [3] * 3
    assert plan.assignments == make_folds(docs, k=10, seed=0).assignments
    assert plan.assignments != make_folds(docs, k=10, seed=1).assignments


def test_fold_errors(micro_corpus):
    with pytest.raises(ValueError):
        make_folds(micro_corpus, k=4)
    with pytest.raises(ValueError):
        make_folds(micro_corpus, k=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 60), st.integers(2, 10), st.integers(0, 2**16))
def test_fold_partition(n_docs, k, seed):
    docs = generate_synthetic_corpus(n_docs, vocab_size=10, max_clauses=5, seed=seed)
    plan = make_folds(docs, k=k, seed=seed)
    seen = []
    for f in range(k):
        train, test = plan.split(docs, f)
        assert not {d.id for d in train} & {d.id for d in test}
        assert len(train) + len(test) == n_docs
        seen += [d.id for d in test]
    assert sorted(seen) == sorted(d.id for d in docs)
    assert max(plan.sizes()) - min(plan.sizes()) <= 1


# -- synthetic corpus -----------------------------------------------------


def test_synthetic_is_deterministic():
    assert generate_synthetic_corpus(15, seed=9) == generate_synthetic_corpus(15, seed=9)
    assert generate_synthetic_corpus(15, seed=9) != generate_synthetic_corpus(15, seed=10)


def test_synthetic_planted_tokens():
    for doc in generate_synthetic_corpus(50, seed=2, multi_pair_rate=0.3):
        for c in doc.clauses:
            assert c.is_emotion == any(t.startswith("emo_") for t in c.tokens)
            assert c.is_cause == any(t.startswith("cause_") for t in c.tokens)
        assert 1 <= len(doc.gold_pairs) <= 2
        assert len(doc.emotions) == 1


def test_synthetic_distance_profile():
    docs = generate_synthetic_corpus(4000, vocab_size=20, max_clauses=8, seed=0)
    hist = distance_histogram(docs)
    total = sum(hist.values())
    for key, target in zip(("Dist0", "Dist1", "Dist2", "Dist>2"), (0.51, 0.26, 0.08, 0.15)):
        assert abs(hist[key] / total - target) < 0.03


def test_synthetic_rejects_bad_profile():
    with pytest.raises(ValueError):
        generate_synthetic_corpus(5, distance_profile=(0.5, 0.5, 0.5, 0.0))
    with pytest.raises(ValueError):
        generate_synthetic_corpus(5, max_clauses=3)
