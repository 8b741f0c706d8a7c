import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """record(k, ok, detail): stores one acceptance line, printed in the terminal summary."""
    def record(k: int, ok: bool, detail: str) -> bool:
        _CRITERIA[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[k])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
