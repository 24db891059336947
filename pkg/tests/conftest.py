import numpy as np
import pytest

from sdfit.evaluation import generate_scene
from sdfit.geometry import ModelKind

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def _report(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_plane_scene():
    return generate_scene(2, ModelKind.HOMOGRAPHY, 60, 0.5, 1.0, seed=3)


@pytest.fixture(scope="session")
def one_rigid_scene():
    return generate_scene(1, ModelKind.FUNDAMENTAL, 100, 0.7, 1.0, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
