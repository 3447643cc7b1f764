import numpy as np
import pytest

from tidkit.fixtures import aap_fig1_slice, load_aap_kb, mini_aap_id, mini_kb


@pytest.fixture(scope="session")
def aap_kb():
    return load_aap_kb()


@pytest.fixture(scope="session")
def fig1_slice(aap_kb):
    return aap_fig1_slice(aap_kb)


@pytest.fixture
def mini_id():
    return mini_aap_id()


@pytest.fixture(scope="session")
def small_kb():
    return mini_kb()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it, then assert."""

    def check(number: int, title: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'} [{number:>2}] {title}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
