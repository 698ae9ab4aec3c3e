import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpgfem.mesh import Rect, build_rect_mesh, classify_boundary, extract_skeleton  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def exp1_meshes():
    r1, r2 = Rect(0, 1, 0, 1), Rect(1, 2, 0, 1)

    def make(n):
        m1, m2 = build_rect_mesh(r1, n, n), build_rect_mesh(r2, n, n)
        return m1, m2, extract_skeleton(m1), classify_boundary(m1, m2, r1, r2)

    return make
