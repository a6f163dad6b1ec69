import numpy as np
import pytest
from hypothesis import settings

from mmwave_coord import AntennaParams, NetworkConfig, OperatorParams, PropagationParams, dbm_to_watts

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def shared_config(k1=1, k2=6, p=0.6, n=12):
    """Two-operator sharing scenario used throughout the coverage studies."""
    ops = (
        OperatorParams(5e-5, float(dbm_to_watts(20)), 100e6, k1),
        OperatorParams(1e-4, float(dbm_to_watts(25)), 200e6, k2),
    )
    return NetworkConfig(ops, PropagationParams(), AntennaParams(n, 0.1, p))


@pytest.fixture
def make_config():
    return shared_config


@pytest.fixture
def gamma_grid():
    return np.linspace(1e7, 3e9, 60)


_CRITERIA: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def record_criterion():
    """Collect an acceptance verdict; the terminal summary prints one line per criterion."""

    def record(number: int, ok: bool, detail: str):
        _CRITERIA.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  " + "; ".join(d if ok else f"[FAIL] {d}" for ok, d in parts))
