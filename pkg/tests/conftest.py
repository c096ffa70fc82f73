import functools

import numpy as np
import pytest

from heatopt.temporal import TemporalMesh, assemble_A_ht_dense

_RESULTS = {}


@functools.lru_cache(maxsize=None)
def dense_At(n_t):
    """Dense temporal stiffness oracle; it does not depend on T."""
    A = assemble_A_ht_dense(TemporalMesh(n_t))
    A.setflags(write=False)
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion():
    """Store one acceptance verdict for the terminal summary."""

    def record(key, passed, detail):
        _RESULTS[key] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = _RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
