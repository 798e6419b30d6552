import numpy as np
import pytest

from online_spectral.model import TopicParams

EASY_PRIOR = (0.15, 0.35, 0.5)


@pytest.fixture
def easy():
    """Three topics over three words, word j emitted by topic j with p = 0.9."""
    return TopicParams.concentrated(EASY_PRIOR, 0.9)


@pytest.fixture
def hard():
    return TopicParams.concentrated(EASY_PRIOR, 0.7)


def random_params(rng, d, K, min_gap=0.02):
    """Random model with well-separated omega and a full-rank U."""
    while True:
        omega = rng.dirichlet(np.ones(K))
        if K > 1 and np.min(np.diff(np.sort(omega))) < min_gap:
            continue
        if omega.min() < 0.02:
            continue
        U = rng.dirichlet(np.ones(d), size=K).T
        if np.linalg.svd(U, compute_uv=False)[-1] < 0.05:
            continue
        return TopicParams(omega, U)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
