import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gwaspipe.dataset import CategoricalDataset  # noqa: E402

# rows of the 6 x 5 worked example over {A, B, C}
TABLE_ROWS = [
    ("C", "B", "B", "B", "C"),
    ("B", "C", "A", "B", "A"),
    ("C", "C", "C", "A", "A"),
    ("A", "B", "B", "A", "A"),
    ("B", "A", "C", "C", "A"),
    ("C", "C", "A", "A", "B"),
]
TABLE_LABELS = [0, 1, 1, 0, 1, 1]
TABLE_ALPHABET = ("A", "B", "C")


@pytest.fixture
def table_dataset():
    codes = [[TABLE_ALPHABET.index(s) for s in row] for row in TABLE_ROWS]
    return CategoricalDataset(np.array(codes), np.array(TABLE_LABELS), TABLE_ALPHABET)


ACCEPTANCE = []


def record_acceptance(number, name, passed, elapsed, limit, detail=""):
    ACCEPTANCE.append((number, name, passed, elapsed, limit, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, elapsed, limit, detail in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {number:>2}: {name} ({elapsed:.3f}s, limit {limit:g}s) {detail}".rstrip()
        )
