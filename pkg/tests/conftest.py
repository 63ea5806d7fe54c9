import pytest
from hypothesis import HealthCheck, settings

from photonic_gan import _jit

settings.register_profile(
    "default",
    deadline=None,  # first calls include numba compilation
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test once per kernel backend, restoring the original afterwards."""
    before = _jit.use_numba()
    _jit.use_numba(request.param == "numba")
    yield request.param
    _jit.use_numba(before)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
