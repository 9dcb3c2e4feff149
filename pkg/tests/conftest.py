import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_CRITERIA = {}


class Criterion:
    """Outcome of one acceptance criterion; stays FAIL unless ``record`` passes."""

    def __init__(self, number, budget_s):
        self.number = number
        self.budget_s = budget_s
        self.ok = False
        self.detail = "did not complete"
        self.start = time.perf_counter()

    def record(self, ok, detail):
        elapsed = time.perf_counter() - self.start
        within = elapsed < self.budget_s
        self.ok = bool(ok) and within
        self.detail = f"{detail}; {elapsed:.1f} s of {self.budget_s:g} s"
        assert ok, detail
        assert within, f"took {elapsed:.1f} s, budget {self.budget_s:g} s"


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("criterion")
    c = Criterion(*mark.args)
    yield c
    _CRITERIA[c.number] = c


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        c = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if c.ok else 'FAIL'}  {c.detail}")
