import pytest

from app.core.config import Settings
from app.data.services import default_synthetic_spec, generate_synthetic
from app.pipeline.services import run_fit, split_train_test
from tests.helpers import TEST_END, TRAIN_END


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture(scope="session")
def corpus():
    """Reference corpus with 5% noise: (series, calendar, truth)."""
    return generate_synthetic(default_synthetic_spec(weeks=3, noise_fraction=0.05, seed=0))


@pytest.fixture(scope="session")
def clean_corpus():
    return generate_synthetic(default_synthetic_spec(weeks=3, noise_fraction=0.0, seed=0))


@pytest.fixture(scope="session")
def fitted(corpus):
    """Model fitted on the first two weeks of the noisy corpus, plus the test week and its events."""
    series, calendar, _ = corpus
    train, test = split_train_test(series, TRAIN_END, TEST_END)
    doc, summary = run_fit(train, calendar.within(train.start, train.end), Settings())
    return doc, summary, test, calendar.within(test.start, test.end)
