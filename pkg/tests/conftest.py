import numpy as np
import pytest
from hypothesis import strategies as st


def prob_vectors(min_k=2, max_k=8, min_mass=0.0):
    """Hypothesis strategy for probability vectors (optionally bounded away from 0)."""
    lo = max(min_mass, 0.0)

    def build(weights):
        w = np.asarray(weights, dtype=np.float64)
        return w / w.sum()

    return st.integers(min_k, max_k).flatmap(
        lambda k: st.lists(
            st.floats(lo if lo > 0 else 0.0, 1.0, allow_nan=False), min_size=k, max_size=k
        ).filter(lambda w: sum(w) > 1e-3).map(build)
    )


def positive_prob_vectors(min_k=2, max_k=8):
    return prob_vectors(min_k, max_k, min_mass=0.01)


def prob_pairs(min_k=2, max_k=8):
    """(p, q) with equal length, q strictly positive."""
    def pair(k):
        p = st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k).filter(lambda w: sum(w) > 1e-3)
        q = st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)
        return st.tuples(p, q).map(
            lambda t: (np.asarray(t[0]) / sum(t[0]), np.asarray(t[1]) / sum(t[1]))
        )

    return st.integers(min_k, max_k).flatmap(pair)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# lines recorded by the acceptance suite, echoed at the end of the run
ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_REPORT, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
