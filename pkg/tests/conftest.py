import numpy as np
import pytest

from tsadbench import ingest


@pytest.fixture(scope="session")
def small_corpus():
    """Short series for oracle-equivalence tests."""
    return ingest.default_corpus(length=1800, period=60, seed=777)


@pytest.fixture(scope="session")
def default_corpus():
    return ingest.default_corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
