from pathlib import Path

import pytest

from formation_figures import load_run

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def benchmark_run():
    return load_run(
        FIXTURES / "benchmark_run.csv", FIXTURES / "benchmark_summary.json"
    )
