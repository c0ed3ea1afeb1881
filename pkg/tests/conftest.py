import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]
MINI = ROOT / "src" / "wsbmrec" / "data" / "mini"
DATA = ROOT / "src" / "wsbmrec" / "data"


def movielens_dir():
    d = Path(os.environ.get("WSBMREC_MOVIELENS", ROOT / "data" / "ml-100k"))
    return d if (d / "u.data").exists() else None


@pytest.fixture
def mini_dir():
    return MINI


@pytest.fixture(scope="session")
def movielens():
    d = movielens_dir()
    if d is None:
        pytest.skip("MovieLens 100K not found; run scripts/fetch_movielens.py or set WSBMREC_MOVIELENS")
    return d


ACCEPTANCE = []  # (number, title, passed, detail) appended by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
