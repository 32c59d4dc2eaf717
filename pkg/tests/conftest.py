from __future__ import annotations

import numpy as np
import pytest

from protoldpc.component import BinaryLinearCode
from protoldpc.protograph import Protograph

CODE52_WORDS = ["00000", "01011", "10101", "11110"]

# small protographs used across modules; rows are checks, columns variables
DEGREE_ONE_NEIGHBOUR = [[1, 0, 1, 1], [1, 1, 1, 1], [0, 0, 1, 1]]
SMALL_RED_EMPTY = [[1, 2, 0, 0], [0, 1, 3, 2], [0, 0, 0, 2]]
SMALL_RED_NONEMPTY = [[1, 1, 0, 0], [0, 1, 2, 0], [0, 0, 3, 3]]


@pytest.fixture
def code52() -> BinaryLinearCode:
    return BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")


@pytest.fixture
def red_empty() -> Protograph:
    return Protograph.from_matrix(SMALL_RED_EMPTY)


@pytest.fixture
def red_nonempty() -> Protograph:
    return Protograph.from_matrix(SMALL_RED_NONEMPTY)


def random_standard_protograph(rng: np.random.Generator, max_rows: int = 4, max_cols: int = 6,
                               entry_max: int = 3, punctured: bool = True) -> Protograph:
    """Random standard protograph with no empty row or column."""
    while True:
        nc = int(rng.integers(1, max_rows + 1))
        nv = int(rng.integers(nc + 1, max_cols + 2))
        base = rng.integers(0, entry_max + 1, size=(nc, nv))
        if (base.sum(axis=0) == 0).any() or (base.sum(axis=1) == 0).any():
            continue
        punct = {int(rng.integers(nv))} if punctured and rng.random() < 0.3 else set()
        return Protograph.from_matrix(base, punct)


# one summary line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
