from datetime import datetime, timezone

import pytest
from hypothesis import strategies as st

from trendminer.corpus import Corpus

DEC_10 = int(datetime(2012, 12, 10, tzinfo=timezone.utc).timestamp())
DAY = 86400

ACCEPTANCE_RESULTS = []


@pytest.fixture
def toy():
    """T1={a,b,c}, T2={a,b}, T3={a}, T4={b,c}; ids a=0, b=1, c=2."""
    return Corpus.from_baskets([["a", "b", "c"], ["a", "b"], ["a"], ["b", "c"]])


@st.composite
def corpora(draw, max_items=8, max_transactions=30, max_days=6):
    """Small random corpora with timestamps spread over a few days."""
    n_items = draw(st.integers(1, max_items))
    letters = [chr(ord("a") + i) for i in range(n_items)]
    baskets = draw(
        st.lists(st.sets(st.sampled_from(letters), min_size=1), min_size=1, max_size=max_transactions)
    )
    days = draw(st.lists(st.integers(0, max_days - 1), min_size=len(baskets), max_size=len(baskets)))
    stamps = [DEC_10 + d * DAY + 3600 for d in days]
    return Corpus.from_baskets(baskets, timestamps=stamps)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion implemented by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        ACCEPTANCE_RESULTS.append((number, title, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
