import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mgsag import MGSAG, check_documents
from mgsag.corpus import EmbeddingTable, synthetic_lexicon


def small(**kw):
    params = dict(embedding_dim=4, word_hidden=4, clause_hidden=2, epochs=2, lexicon=synthetic_lexicon())
    params.update(kw)
    return MGSAG(**params)


def test_get_params_and_clone():
    est = small(fgsag_off=True)
    params = est.get_params()
    assert params["fgsag_off"] is True and params["embedding_dim"] == 4
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(epochs=5)
    assert est.epochs == 5


def test_check_documents(bus_doc):
    with pytest.raises(TypeError):
        check_documents(bus_doc)
    with pytest.raises(ValueError):
        check_documents([])
    with pytest.raises(TypeError):
        check_documents(["text"])
    assert check_documents((bus_doc,)) == [bus_doc]


def test_predict_before_fit(micro_corpus):
    with pytest.raises(NotFittedError):
        small().predict(micro_corpus)


def test_fit_predict(micro_corpus):
    est = small().fit(micro_corpus)
    assert len(est.loss_trace_) == 2 and est.n_params_ > 0
    preds = est.predict(micro_corpus)
    assert len(preds) == len(micro_corpus)
    probs = est.predict_proba(micro_corpus)
    for doc, p in zip(micro_corpus, probs):
        assert p.shape == (len(doc), len(doc), 2)
    assert 0.0 <= est.score(micro_corpus) <= 1.0
    attn = est.keyword_attention(micro_corpus)
    assert attn[0]["doc_id"] == micro_corpus[0].id


def test_invalid_config_raises_at_fit(micro_corpus):
    with pytest.raises(ValueError):
        small(clause_hidden=3).fit(micro_corpus)


def test_save_load_roundtrip(tmp_path, micro_corpus):
    emb = EmbeddingTable(4, seed=0)
    est = small(embeddings=emb).fit(micro_corpus)
    path = tmp_path / "m.npz"
    est.save(path)
    back = MGSAG.load(path, embeddings=emb, lexicon=synthetic_lexicon())
    for a, b in zip(est.predict_proba(micro_corpus), back.predict_proba(micro_corpus)):
        np.testing.assert_array_equal(a, b)
    assert back.get_params()["epochs"] == 2
