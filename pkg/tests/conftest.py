import numpy as np
import pytest

from mgsag.config import TrainConfig
from mgsag.corpus import Document, EmbeddingTable, generate_synthetic_corpus, synthetic_lexicon
from mgsag.training import Resources

# The eight-clause bus example; (7, 2) is its only emotion-cause pair.
BUS_CLAUSES = [
    "when the driver was about to start the bus to leave the station",
    "an old lady ran to the front of the bus with a fast speed and sat down on the ground",
    "passengers standing in the front of the bus can see this scene clearly",
    "seeing this scene",
    "the passengers in the car immediately became restless",
    "and had a heated debate",
    "some of the passengers were angry",
    "and told the driver he should not be meddlesome",
]


@pytest.fixture
def bus_doc():
    return Document.build("bus", [c.split() for c in BUS_CLAUSES], [(7, 2)])


@pytest.fixture
def tiny_config():
    return TrainConfig.scaled(4, dropout_rate=0.0)


@pytest.fixture
def micro_corpus():
    return generate_synthetic_corpus(3, vocab_size=20, max_clauses=5, seed=1, clause_length=(2, 4))


@pytest.fixture
def tiny_resources():
    return Resources(EmbeddingTable(4, seed=0), frozenset(synthetic_lexicon()))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance summary ----------------------------------------------------

_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[report.nodeid.split("::")[-1]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
