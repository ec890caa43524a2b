import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def seq_file(tmp_path):
    """Write a list of elements to a sequence file and return its path."""
    from regulus.serialize import write_sequence

    def make(elements, name="seq.jsonl"):
        path = tmp_path / name
        write_sequence(path, elements)
        return path

    return make


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test passes only if ``ok`` is true."""
    table = request.config.stash[ACCEPTANCE]

    def record(number: int, ok: bool, detail: str) -> bool:
        table[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(ACCEPTANCE, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        ok, detail = table[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
