import pytest

from tankcool.model import bundled_config, load_scenario

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def load():
    cache = {}

    def _load(name):
        if name not in cache:
            cache[name] = load_scenario(bundled_config(name))
        return cache[name]

    return _load


@pytest.fixture(scope="session")
def acceptance():
    """Record of acceptance-criterion outcomes, printed at the end of the run."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")
