import numpy as np
import pytest
from hypothesis import settings

from taskdiag.stream import Stream

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE = []


def make_stream(values, step=600.0, names=None, series_id="s"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or tuple(f"c{i}" for i in range(values.shape[1]))
    return Stream(values, step, 0.0, tuple(names), series_id)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
