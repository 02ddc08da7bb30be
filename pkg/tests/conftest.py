import numpy as np
import pytest

from mirec.domain import Candidate, Request

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def make_request(rows, t=1):
    """Request from ``[(item_id, channel, utility), ...]``."""
    return Request.from_candidates(t, [Candidate(i, c, u) for i, c, u in rows])


def random_request(rng, n_items, n_channels, t=1):
    chans = rng.integers(0, n_channels, size=n_items)
    utils = rng.random(n_items)
    ids = rng.permutation(1000)[:n_items]
    return Request(t=t, item_ids=ids.astype(np.int64), channels=chans.astype(np.int64), utilities=utils)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
