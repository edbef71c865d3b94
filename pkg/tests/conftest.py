from pathlib import Path

import pytest

from salmon.config import load_config
from salmon.harness import run_in_process

ROOT = Path(__file__).resolve().parents[1]
FJORD = ROOT / "missions" / "fjord.mis"
FJORD_CONFIG = ROOT / "configs" / "fjord.ini"
VECTORS = Path(__file__).resolve().parent / "vectors"


@pytest.fixture
def fjord_path():
    return FJORD


@pytest.fixture(scope="session")
def fjord_config():
    return load_config(FJORD_CONFIG)


@pytest.fixture(scope="session")
def fjord_run(fjord_config, tmp_path_factory):
    """One in-process closed-loop fjord mission shared by the read-only checks."""
    d = tmp_path_factory.mktemp("fjord_run")
    return run_in_process(fjord_config, d)


ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
