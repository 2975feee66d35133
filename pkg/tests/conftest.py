import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from tonalvae.pipeline import load_corpus  # noqa: E402
from tonalvae.score import segment  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
CHORALES = FIXTURES / "chorales"

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def chorales():
    return load_corpus(CHORALES)


@pytest.fixture(scope="session")
def chorale_segments(chorales):
    return [s for p in chorales for s in segment(p.grid, 10, p.piece_id)]


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    number = request.node.get_closest_marker("criterion").args[0]
    notes = []
    ACCEPTANCE[number] = ("FAIL", notes)
    yield notes.append
    ACCEPTANCE[number] = ("PASS" if request.node.rep_call.passed else "FAIL", notes)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, notes = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}" + (f"  ({'; '.join(notes)})" if notes else ""))
