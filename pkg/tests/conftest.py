import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minidml.matrix import set_matmul_kernel, set_sparsity_threshold  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _reset_runtime_defaults():
    yield
    set_sparsity_threshold(0.4)
    set_matmul_kernel(None)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    from verdicts import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
