import numpy as np
import pytest

from nesc.config import Config
from nesc.features import EmbeddingTable
from nesc.ner import train_ner
from nesc.synthetic import planted_corpus


@pytest.fixture(scope="session")
def small_config():
    return Config(hidden_size=6, nesc_hidden=5, ner_epochs=2, nesc_epochs=2)


@pytest.fixture(scope="session")
def small_corpus():
    return planted_corpus(12, np.random.default_rng(11))


@pytest.fixture(scope="session")
def small_embeddings(small_corpus):
    return EmbeddingTable.random(small_corpus.vocabulary(), np.random.default_rng(12))


@pytest.fixture(scope="session")
def small_ner(small_corpus, small_embeddings, small_config):
    return train_ner(small_corpus, small_embeddings, small_config, np.random.default_rng(13))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
