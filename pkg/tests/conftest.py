from pathlib import Path

import numpy as np
import pytest

from wdngen.inp_io import convert_to_si, load_bundled

DATA = Path(__file__).resolve().parents[1] / "src" / "wdngen" / "data"
BUNDLED = sorted(p.stem for p in DATA.glob("*.inp"))
SMALL = ["single_pipe", "y_net", "dw_loop", "pump_tank", "prv_net", "toy3"]


@pytest.fixture(scope="session")
def hanoi():
    return convert_to_si(load_bundled("hanoi"))


@pytest.fixture(scope="session")
def toy():
    return convert_to_si(load_bundled("toy3"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def _report(number: int, title: str, ok: bool, detail: str):
        line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
