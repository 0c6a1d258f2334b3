import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bayeslasso.geometry import GeometryContext

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def random_context(rng, p, n=None, y_scale=1.0, entry=2.0):
    n = int(rng.integers(1, p + 1)) if n is None else n
    A = rng.uniform(-entry, entry, size=(n, p))
    y = rng.uniform(-entry, entry, size=n) * y_scale
    return GeometryContext(A, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
