import os

import pytest
from hypothesis import settings

from helpers import make_classification, make_regression

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key, status, detail in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL/SKIP line for the end-of-run summary."""

    def report(key: str, passed, detail: str = ""):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        request.config.stash[_ACCEPTANCE].append((key, status, detail))

    return report


@pytest.fixture
def clf_data():
    return make_classification()


@pytest.fixture
def reg_data():
    return make_regression()
