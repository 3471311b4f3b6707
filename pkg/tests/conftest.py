import pytest

from diw_mrac.config import config_from_dict

_ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


DEFAULT_MODEL = {"beta": [1.0, -2.0, 1.0, 1.0, 1.0, -3.0, 1.0]}


@pytest.fixture
def make_config():
    def _make(**sections):
        doc = {"model": DEFAULT_MODEL}
        doc.update(sections)
        return config_from_dict(doc)

    return _make
